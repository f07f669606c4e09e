use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::hash::Hash;

use serde::Serialize;

use super::program::Program;
use super::step::State;
use super::{Label, SemError};
use crate::Valuation;

/// Default bound on the number of explored states.
pub const DEFAULT_STATE_CAP: usize = 200_000;

/// A τ-cycle found while compressing; holds the states on the cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TauCycle<S>(pub Vec<S>);

/// States with no τ successor reachable from `start` by one or more τ
/// steps, in discovery order. Returns an empty list when `start` has no τ.
/// A τ-cycle is reported through `on_cycle`.
pub fn tau_endpoints<S, E>(
    start: &S,
    mut succ: impl FnMut(&S) -> Result<Vec<S>, E>,
    on_cycle: impl FnOnce(TauCycle<S>) -> E,
) -> Result<Vec<S>, E>
where
    S: Clone + Eq + Hash,
{
    #[derive(PartialEq)]
    enum Mark {
        Open,
        Closed,
    }
    let mut marks: HashMap<S, Mark> = HashMap::new();
    let mut endpoints = Vec::new();
    let first = succ(start)?;
    if first.is_empty() {
        return Ok(endpoints);
    }
    marks.insert(start.clone(), Mark::Open);
    let mut stack: Vec<(S, Vec<S>)> = vec![(start.clone(), first.into_iter().rev().collect())];
    while let Some((_, pending)) = stack.last_mut() {
        let Some(next) = pending.pop() else {
            let (s, _) = stack.pop().unwrap();
            marks.insert(s, Mark::Closed);
            continue;
        };
        match marks.get(&next) {
            Some(Mark::Open) => {
                let from = stack.iter().position(|(s, _)| *s == next).unwrap();
                return Err(on_cycle(TauCycle(stack[from..].iter().map(|(s, _)| s.clone()).collect())));
            }
            Some(Mark::Closed) => continue,
            None => {}
        }
        let children = succ(&next)?;
        if children.is_empty() {
            endpoints.push(next.clone());
            marks.insert(next, Mark::Closed);
        } else {
            marks.insert(next.clone(), Mark::Open);
            stack.push((next, children.into_iter().rev().collect()));
        }
    }
    Ok(endpoints)
}

/// Adjacency lists: for each state, its outgoing `(label, destination)`.
pub type Adjacency = Vec<Vec<(Label, usize)>>;

/// States reachable from `q` as `(τ)^{0,1} l' (τ)^{0,1}` for every label
/// `l'` accepted by `accept`, paired with that label. For `l' = τ` at least
/// one τ is taken.
pub fn weak_targets(adj: &Adjacency, q: usize, accept: &dyn Fn(&Label) -> bool) -> Vec<(Label, usize)> {
    let taus = |s: usize| adj[s].iter().filter(|(l, _)| l.is_tau()).map(|(_, d)| *d);
    let mut before = vec![q];
    before.extend(taus(q));
    let mut out: Vec<(Label, usize)> = Vec::new();
    let mut seen: BTreeSet<(usize, String)> = BTreeSet::new();
    let mut add = |l: &Label, s: usize, out: &mut Vec<(Label, usize)>| {
        if seen.insert((s, format!("{l:?}"))) {
            out.push((l.clone(), s));
        }
    };
    for &p in &before {
        for (l, mid) in &adj[p] {
            if !accept(l) {
                continue;
            }
            add(l, *mid, &mut out);
            for after in taus(*mid) {
                add(l, after, &mut out);
            }
        }
    }
    out
}

/// States reachable from `q` by `(τ)^{0,1} l (τ)^{0,1}` with exactly the
/// label `l`.
pub fn weak_step(adj: &Adjacency, q: usize, l: &Label) -> BTreeSet<usize> {
    weak_targets(adj, q, &|x| x == l).into_iter().map(|(_, s)| s).collect()
}

#[derive(Debug, Clone)]
pub struct ExploreOptions {
    /// Delay budget per transition, in seconds.
    pub step: f64,
    pub state_cap: usize,
    /// Replace maximal τ-chains by single τ edges.
    pub compress: bool,
    /// Input values offered on channels without a partner.
    pub menu: BTreeMap<String, Vec<f64>>,
}

impl ExploreOptions {
    pub fn new(step: f64) -> ExploreOptions {
        ExploreOptions { step, state_cap: DEFAULT_STATE_CAP, compress: true, menu: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Edge {
    pub src: usize,
    pub label: Label,
    pub dst: usize,
}

/// An explicit transition system over program states. State 0 is initial.
#[derive(Debug, Clone)]
pub struct TransitionSystem {
    pub states: Vec<State>,
    pub adj: Adjacency,
    /// States that lost at least one transition to the exploration filter.
    pub truncated: Vec<bool>,
}

impl TransitionSystem {
    pub fn initial(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(src, out)| out.iter().map(move |(label, dst)| Edge { src, label: label.clone(), dst: *dst }))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    /// JSON lines: one object per transition, then one per state with its
    /// configuration hash and valuation.
    pub fn to_json_lines(&self, prog: &Program) -> String {
        #[derive(Serialize)]
        struct StateRow<'a> {
            id: usize,
            term_hash: String,
            valuation: &'a Valuation,
        }
        let mut out = String::new();
        for e in self.edges() {
            out.push_str(&serde_json::to_string(&e).expect("edge serializes"));
            out.push('\n');
        }
        for (id, s) in self.states.iter().enumerate() {
            let valuation = prog.valuation(s);
            let row = StateRow { id, term_hash: s.term_hash(), valuation: &valuation };
            out.push_str(&serde_json::to_string(&row).expect("state serializes"));
            out.push('\n');
        }
        out
    }
}

/// Breadth-first exploration from `v0`. Each candidate transition is passed
/// to `keep`; rejected ones are dropped and their source marked truncated.
pub fn explore(
    prog: &Program,
    v0: &Valuation,
    opts: &ExploreOptions,
    keep: &mut dyn FnMut(&Label, &State) -> bool,
) -> Result<TransitionSystem, SemError> {
    let init = prog.initial_state(v0);
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut ts = TransitionSystem { states: Vec::new(), adj: Vec::new(), truncated: Vec::new() };
    let mut queue = VecDeque::new();
    let mut intern = |s: State, ts: &mut TransitionSystem, queue: &mut VecDeque<usize>| -> Result<usize, SemError> {
        if let Some(&i) = index.get(&s) {
            return Ok(i);
        }
        if ts.states.len() >= opts.state_cap {
            return Err(SemError::StateCap { cap: opts.state_cap });
        }
        let i = ts.states.len();
        index.insert(s.clone(), i);
        ts.states.push(s);
        ts.adj.push(Vec::new());
        ts.truncated.push(false);
        queue.push_back(i);
        Ok(i)
    };
    intern(init, &mut ts, &mut queue)?;
    while let Some(i) = queue.pop_front() {
        let q = ts.states[i].clone();
        let raw = prog.enabled_with(&q, opts.step, &opts.menu)?;
        let mut moves: Vec<(Label, State)> = Vec::new();
        if opts.compress && raw.iter().any(|(l, _)| l.is_tau()) {
            let ends = tau_endpoints(
                &q,
                |s| prog.tau_successors(s),
                |cycle| SemError::Divergence { cycle: cycle.0.iter().map(|s| prog.render(s)).collect() },
            )?;
            moves.extend(ends.into_iter().map(|s| (Label::Tau, s)));
            moves.extend(raw.into_iter().filter(|(l, _)| !l.is_tau()));
        } else {
            moves = raw;
        }
        for (label, dst) in moves {
            if !keep(&label, &dst) {
                ts.truncated[i] = true;
                continue;
            }
            let j = intern(dst, &mut ts, &mut queue)?;
            if !ts.adj[i].iter().any(|(l, d)| *d == j && *l == label) {
                ts.adj[i].push((label, j));
            }
        }
    }
    Ok(ts)
}
