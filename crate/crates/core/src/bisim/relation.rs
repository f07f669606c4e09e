use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::Serialize;

use crate::semantics::{weak_targets, Label};

use super::{label_distance, BisimError, BoundedTS};

/// Infinity-norm distance between two observations.
pub fn obs_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// A relation between the states of two bounded systems.
#[derive(Debug, Clone, Serialize)]
pub struct BisimRelation {
    pub pairs: BTreeSet<(usize, usize)>,
    pub h: f64,
    pub eps: f64,
    /// Size of the observation-close relation the fixpoint started from.
    pub initial_pairs: usize,
    /// Pair checks performed by the fixpoint.
    pub iterations: usize,
}

impl BisimRelation {
    pub fn contains(&self, p: usize, q: usize) -> bool {
        self.pairs.contains(&(p, q))
    }

    /// JSON array of `[id1, id2]` pairs.
    pub fn to_json(&self) -> String {
        let pairs: Vec<[usize; 2]> = self.pairs.iter().map(|&(a, b)| [a, b]).collect();
        serde_json::to_string(&pairs).expect("pairs serialize")
    }
}

/// All pairs whose observations are within `eps`.
pub fn initial_relation(t1: &BoundedTS, t2: &BoundedTS, eps: f64) -> Result<BTreeSet<(usize, usize)>, BisimError> {
    if t1.obs_vars.len() != t2.obs_vars.len() {
        return Err(BisimError::DimensionMismatch(t1.obs_vars.len(), t2.obs_vars.len()));
    }
    let mut out = BTreeSet::new();
    for (p, a) in t1.observations.iter().enumerate() {
        for (q, b) in t2.observations.iter().enumerate() {
            if obs_distance(a, b) <= eps {
                out.insert((p, q));
            }
        }
    }
    Ok(out)
}

/// Per state, the weak moves available for matching: `(τ)^{0,1} l (τ)^{0,1}`
/// for every label, plus staying put as a zero-length τ move.
#[derive(Debug, Clone)]
pub struct WeakMoves(pub Vec<Vec<(Label, usize)>>);

impl WeakMoves {
    pub fn of(t: &BoundedTS) -> WeakMoves {
        WeakMoves(
            (0..t.len())
                .map(|q| {
                    let mut moves = vec![(Label::Tau, q)];
                    moves.extend(weak_targets(&t.adj, q, &|_| true));
                    moves
                })
                .collect(),
        )
    }
}

struct Matcher<'a> {
    t1: &'a BoundedTS,
    t2: &'a BoundedTS,
    w1: WeakMoves,
    w2: WeakMoves,
    h: f64,
}

/// Which clause of the bisimulation definition failed, if any.
enum Check {
    Ok,
    FirstUnmatched(Label, usize),
    SecondUnmatched(Label, usize),
}

impl<'a> Matcher<'a> {
    fn new(t1: &'a BoundedTS, t2: &'a BoundedTS, h: f64) -> Matcher<'a> {
        Matcher { t1, t2, w1: WeakMoves::of(t1), w2: WeakMoves::of(t2), h }
    }

    fn check(&self, p: usize, q: usize, rel: &dyn Fn(usize, usize) -> bool) -> Check {
        if self.t1.truncated[p] || self.t2.truncated[q] {
            return Check::Ok;
        }
        for (l, p2) in &self.t1.adj[p] {
            let matched = self.w2.0[q].iter().any(|(l2, q2)| label_distance(l, l2) <= self.h && rel(*p2, *q2));
            if !matched {
                return Check::FirstUnmatched(l.clone(), *p2);
            }
        }
        for (l, q2) in &self.t2.adj[q] {
            let matched = self.w1.0[p].iter().any(|(l1, p2)| label_distance(l1, l) <= self.h && rel(*p2, *q2));
            if !matched {
                return Check::SecondUnmatched(l.clone(), *q2);
            }
        }
        Check::Ok
    }

    /// States that may need re-checking when a pair with `s` in this
    /// position is removed: strong and weak predecessors.
    fn predecessors(t: &BoundedTS, w: &WeakMoves) -> Vec<Vec<usize>> {
        let mut pred: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); t.len()];
        for (s, out) in t.adj.iter().enumerate() {
            for (_, d) in out {
                pred[*d].insert(s);
            }
        }
        for (s, out) in w.0.iter().enumerate() {
            for (_, d) in out {
                pred[*d].insert(s);
            }
        }
        pred.into_iter().map(|s| s.into_iter().collect()).collect()
    }
}

/// One refinement pass: keeps the pairs of `rel` whose moves are matched
/// within label distance `h` by weak moves landing back in `rel`.
pub fn refine(rel: &BTreeSet<(usize, usize)>, t1: &BoundedTS, t2: &BoundedTS, h: f64) -> BTreeSet<(usize, usize)> {
    let m = Matcher::new(t1, t2, h);
    let inside = |a: usize, b: usize| rel.contains(&(a, b));
    rel.iter().copied().filter(|&(p, q)| matches!(m.check(p, q, &inside), Check::Ok)).collect()
}

/// The maximal (h, ε)-approximate bisimulation between `t1` and `t2`: the
/// greatest fixpoint of [`refine`] below [`initial_relation`], computed
/// with a predecessor worklist.
pub fn max_bisim(t1: &BoundedTS, t2: &BoundedTS, h: f64, eps: f64) -> Result<BisimRelation, BisimError> {
    let init = initial_relation(t1, t2, eps)?;
    let initial_pairs = init.len();
    let m = Matcher::new(t1, t2, h);
    let pred1 = Matcher::predecessors(t1, &m.w1);
    let pred2 = Matcher::predecessors(t2, &m.w2);
    let mut rel: HashSet<(usize, usize)> = init.iter().copied().collect();
    let mut queued: HashSet<(usize, usize)> = rel.clone();
    let mut queue: VecDeque<(usize, usize)> = init.into_iter().collect();
    let mut iterations = 0;
    while let Some((p, q)) = queue.pop_front() {
        queued.remove(&(p, q));
        if !rel.contains(&(p, q)) {
            continue;
        }
        iterations += 1;
        let ok = {
            let inside = |a: usize, b: usize| rel.contains(&(a, b));
            matches!(m.check(p, q, &inside), Check::Ok)
        };
        if ok {
            continue;
        }
        rel.remove(&(p, q));
        for &a in &pred1[p] {
            for &b in &pred2[q] {
                if rel.contains(&(a, b)) && queued.insert((a, b)) {
                    queue.push_back((a, b));
                }
            }
        }
    }
    Ok(BisimRelation { pairs: rel.into_iter().collect(), h, eps, initial_pairs, iterations })
}

/// A failed clause of the bisimulation definition for one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub pair: (usize, usize),
    /// 1: observations too far apart; 2: a move of the first state is
    /// unmatched; 3: a move of the second state is unmatched.
    pub clause: u8,
    pub detail: String,
}

/// Checks every pair of `rel` against the three clauses of the
/// (h, ε)-approximate bisimulation definition.
pub fn is_bisimulation(
    rel: &BTreeSet<(usize, usize)>,
    t1: &BoundedTS,
    t2: &BoundedTS,
    h: f64,
    eps: f64,
) -> Result<(), Violation> {
    let m = Matcher::new(t1, t2, h);
    let inside = |a: usize, b: usize| rel.contains(&(a, b));
    for &(p, q) in rel {
        let dist = obs_distance(&t1.observations[p], &t2.observations[q]);
        if dist > eps {
            return Err(Violation { pair: (p, q), clause: 1, detail: format!("observation distance {dist} > {eps}") });
        }
        match m.check(p, q, &inside) {
            Check::Ok => {}
            Check::FirstUnmatched(l, to) => {
                return Err(Violation { pair: (p, q), clause: 2, detail: format!("move {l} to {to} unmatched") })
            }
            Check::SecondUnmatched(l, to) => {
                return Err(Violation { pair: (p, q), clause: 3, detail: format!("move {l} to {to} unmatched") })
            }
        }
    }
    Ok(())
}
