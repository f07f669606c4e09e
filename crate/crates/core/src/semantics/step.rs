use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use sha2::{Digest, Sha256};

use crate::eval::{CBool, EvalError};
use crate::numerics::{integrate, VectorField, MAX_SUBSTEP};
use crate::syntax::{Dir, Expr, ProcessTerm, RepeatBound};

use super::program::{CEvent, CompiledOde, Node, NodeId, Program};
use super::{Label, SemError, BOUNDARY_LOOKAHEAD, TIME_EPS};

/// Slot values of a state. Equality and hashing are bitwise.
#[derive(Debug, Clone)]
pub struct Vals(pub Vec<f64>);

impl PartialEq for Vals {
    fn eq(&self, other: &Vals) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Eq for Vals {}

impl Hash for Vals {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for v in &self.0 {
            v.to_bits().hash(state);
        }
    }
}

/// One entry of a sequential continuation stack.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Frame {
    /// Execute the node next.
    Run(NodeId),
    /// A wait with the given remaining time, stored as `f64` bits.
    Wait(u64),
    /// Run the body this many more times.
    Repeat(NodeId, u32),
}

/// The control part of a state. `Done` is the terminated process ε.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Config {
    Done,
    /// Continuation stack, top at the end.
    Seq(Vec<Frame>),
    Par(NodeId, Box<Config>, Box<Config>),
}

/// A process state: control configuration and valuation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    pub cfg: Config,
    pub vals: Vals,
}

impl State {
    pub fn is_terminated(&self) -> bool {
        self.cfg == Config::Done
    }

    /// Hex digest identifying the control configuration.
    pub fn term_hash(&self) -> String {
        let digest = Sha256::digest(format!("{:?}", self.cfg).as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn normalize(prog: &Program, mut stack: Vec<Frame>) -> Config {
    loop {
        match stack.last().cloned() {
            None => return Config::Done,
            Some(Frame::Run(n)) => match &prog.nodes[n] {
                Node::Seq(a, b) => {
                    stack.pop();
                    stack.push(Frame::Run(*b));
                    stack.push(Frame::Run(*a));
                }
                Node::Repeat(body, k) => {
                    stack.pop();
                    stack.push(Frame::Repeat(*body, *k));
                }
                _ => return Config::Seq(stack),
            },
            Some(Frame::Repeat(body, k)) => {
                stack.pop();
                if k > 0 {
                    stack.push(Frame::Repeat(body, k - 1));
                    stack.push(Frame::Run(body));
                }
            }
            // an elapsed wait is left in place; it exits by τ
            Some(Frame::Wait(_)) => return Config::Seq(stack),
        }
    }
}

fn par(node: NodeId, l: Config, r: Config) -> Config {
    if l == Config::Done && r == Config::Done {
        Config::Done
    } else {
        Config::Par(node, Box::new(l), Box::new(r))
    }
}

impl Config {
    pub(crate) fn start(prog: &Program, node: NodeId) -> Config {
        match &prog.nodes[node] {
            Node::Par { left, right, .. } => par(node, Config::start(prog, *left), Config::start(prog, *right)),
            _ => normalize(prog, vec![Frame::Run(node)]),
        }
    }

    pub(crate) fn residual(&self, prog: &Program) -> Option<ProcessTerm> {
        match self {
            Config::Done => None,
            Config::Seq(stack) => Some(ProcessTerm::seq_all(stack.iter().rev().map(|f| match f {
                Frame::Run(n) => prog.terms[*n].clone(),
                Frame::Wait(bits) => ProcessTerm::Wait(Expr::Num(f64::from_bits(*bits))),
                Frame::Repeat(b, k) => ProcessTerm::Repeat(Box::new(prog.terms[*b].clone()), RepeatBound::literal(*k)),
            }))),
            Config::Par(_, l, r) => Some(ProcessTerm::parallel(
                l.residual(prog).unwrap_or(ProcessTerm::Skip),
                r.residual(prog).unwrap_or(ProcessTerm::Skip),
            )),
        }
    }
}

pub(crate) enum MoveKind {
    Tau {
        urgent: bool,
    },
    Send {
        chan: usize,
        value: f64,
    },
    /// The received value is stored into `var` when the move fires.
    Recv {
        chan: usize,
        var: usize,
    },
}

pub(crate) struct Move {
    pub kind: MoveKind,
    pub cfg: Config,
    pub vals: Vals,
}

/// The vector field of a compiled ODE with all other slots frozen.
struct SlotField<'a> {
    ode: &'a CompiledOde,
    base: &'a [f64],
}

impl SlotField<'_> {
    fn buffer(&self, x: &[f64]) -> Vec<f64> {
        let mut buf = self.base.to_vec();
        for (i, &s) in self.ode.vars.iter().enumerate() {
            buf[s] = x[i];
        }
        buf
    }

    fn point(&self) -> Vec<f64> {
        self.ode.vars.iter().map(|&s| self.base[s]).collect()
    }

    fn in_domain(&self, x: &[f64]) -> Result<bool, EvalError> {
        self.ode.domain.eval(&self.buffer(x))
    }
}

impl VectorField for SlotField<'_> {
    fn dim(&self) -> usize {
        self.ode.vars.len()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let buf = self.buffer(x);
        self.ode.rhs.iter().map(|e| e.eval(&buf)).collect()
    }
}

fn domain_is_true(ode: &CompiledOde) -> bool {
    matches!(ode.domain, CBool::Const(true))
}

/// True when the evolution cannot continue: its domain is false now or
/// within [`BOUNDARY_LOOKAHEAD`].
fn ode_blocked(ode: &CompiledOde, vals: &Vals) -> Result<bool, EvalError> {
    if domain_is_true(ode) {
        return Ok(false);
    }
    let field = SlotField { ode, base: &vals.0 };
    let x = field.point();
    if !field.in_domain(&x)? {
        return Ok(true);
    }
    let ahead = integrate(&field, &x, BOUNDARY_LOOKAHEAD, BOUNDARY_LOOKAHEAD)?;
    Ok(!field.in_domain(&ahead)?)
}

/// Longest delay up to `budget` for which the domain stays true; when it
/// fails inside, the first time it is false, to within [`TIME_EPS`].
fn ode_max_delay(ode: &CompiledOde, vals: &Vals, budget: f64) -> Result<f64, EvalError> {
    if ode_blocked(ode, vals)? {
        return Ok(0.0);
    }
    if domain_is_true(ode) {
        return Ok(budget);
    }
    let field = SlotField { ode, base: &vals.0 };
    let n = ((budget / MAX_SUBSTEP).ceil() as usize).max(64);
    let s = budget / n as f64;
    let mut x = field.point();
    for k in 0..n {
        let next = integrate(&field, &x, s, s)?;
        if !field.in_domain(&next)? {
            let (mut lo, mut hi) = (0.0, s);
            while hi - lo > TIME_EPS {
                let mid = 0.5 * (lo + hi);
                if field.in_domain(&integrate(&field, &x, mid, mid)?)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(k as f64 * s + hi);
        }
        x = next;
    }
    Ok(budget)
}

fn ode_advance(ode: &CompiledOde, vals: &mut Vals, d: f64) -> Result<(), EvalError> {
    let field = SlotField { ode, base: &vals.0 };
    let x = integrate(&field, &field.point(), d, (d / 64.0).min(MAX_SUBSTEP))?;
    for (i, &s) in ode.vars.iter().enumerate() {
        vals.0[s] = x[i];
    }
    Ok(())
}

impl Program {
    fn replace_top(&self, stack: &[Frame], node: NodeId) -> Config {
        let mut s = stack[..stack.len() - 1].to_vec();
        s.push(Frame::Run(node));
        normalize(self, s)
    }

    fn pop(&self, stack: &[Frame]) -> Config {
        normalize(self, stack[..stack.len() - 1].to_vec())
    }

    fn event_move(&self, ev: &CEvent, cfg: Config, vals: &Vals) -> Result<Move, EvalError> {
        let kind = match ev {
            CEvent::Recv { chan, var } => MoveKind::Recv { chan: *chan, var: *var },
            CEvent::Send { chan, expr } => MoveKind::Send { chan: *chan, value: expr.eval(&vals.0)? },
        };
        Ok(Move { kind, cfg, vals: vals.clone() })
    }

    fn tau(&self, urgent: bool, cfg: Config, vals: Vals) -> Move {
        Move { kind: MoveKind::Tau { urgent }, cfg, vals }
    }

    pub(crate) fn moves(&self, cfg: &Config, vals: &Vals) -> Result<Vec<Move>, EvalError> {
        let mut out = Vec::new();
        match cfg {
            Config::Done => {}
            Config::Seq(stack) => {
                if let Some(Frame::Wait(bits)) = stack.last() {
                    if f64::from_bits(*bits) <= TIME_EPS {
                        // leaves at the boundary instant, ahead of ordinary τ
                        out.push(self.tau(true, self.pop(stack), vals.clone()));
                    }
                    return Ok(out);
                }
                let Some(Frame::Run(n)) = stack.last() else { return Ok(out) };
                match &self.nodes[*n] {
                    Node::Skip => out.push(self.tau(false, self.pop(stack), vals.clone())),
                    Node::Stop => {}
                    Node::Assign { targets, urgent } => {
                        let values = targets.iter().map(|(_, e)| e.eval(&vals.0)).collect::<Result<Vec<_>, _>>()?;
                        let mut next = vals.clone();
                        for ((slot, _), v) in targets.iter().zip(values) {
                            next.0[*slot] = v;
                        }
                        out.push(self.tau(*urgent, self.pop(stack), next));
                    }
                    Node::Wait(e) => {
                        if e.eval(&vals.0)? <= TIME_EPS {
                            out.push(self.tau(false, self.pop(stack), vals.clone()));
                        }
                    }
                    Node::Comm(ev) => out.push(self.event_move(ev, self.pop(stack), vals)?),
                    Node::Guard(b, body) => {
                        let next = if b.eval(&vals.0)? { self.replace_top(stack, *body) } else { self.pop(stack) };
                        out.push(self.tau(false, next, vals.clone()));
                    }
                    Node::IntChoice(a, b) => {
                        out.push(self.tau(false, self.replace_top(stack, *a), vals.clone()));
                        out.push(self.tau(false, self.replace_top(stack, *b), vals.clone()));
                    }
                    Node::ExtChoice(branches) => {
                        for (ev, body) in branches {
                            out.push(self.event_move(ev, self.replace_top(stack, *body), vals)?);
                        }
                    }
                    Node::Ode { ode, branches } => {
                        if ode_blocked(&self.odes[*ode], vals)? {
                            out.push(self.tau(false, self.pop(stack), vals.clone()));
                        } else {
                            for (ev, body) in branches {
                                out.push(self.event_move(ev, self.replace_top(stack, *body), vals)?);
                            }
                        }
                    }
                    Node::Seq(..) | Node::Repeat(..) | Node::Par { .. } => unreachable!("normalized away"),
                }
            }
            Config::Par(node, l, r) => {
                let Node::Par { shared, .. } = &self.nodes[*node] else { unreachable!() };
                let lm = self.moves(l, vals)?;
                let rm = self.moves(r, vals)?;
                for (m, from_left) in lm.iter().map(|m| (m, true)).chain(rm.iter().map(|m| (m, false))) {
                    let other = if from_left { r.as_ref() } else { l.as_ref() };
                    let wrap = |c: &Config| {
                        if from_left {
                            par(*node, c.clone(), other.clone())
                        } else {
                            par(*node, other.clone(), c.clone())
                        }
                    };
                    let kind = match &m.kind {
                        MoveKind::Tau { urgent } => MoveKind::Tau { urgent: *urgent },
                        MoveKind::Send { chan, value } if !shared.contains(chan) => {
                            MoveKind::Send { chan: *chan, value: *value }
                        }
                        MoveKind::Recv { chan, var } if !shared.contains(chan) => {
                            MoveKind::Recv { chan: *chan, var: *var }
                        }
                        _ => continue,
                    };
                    out.push(Move { kind, cfg: wrap(&m.cfg), vals: m.vals.clone() });
                }
                for (a, b, a_left) in lm
                    .iter()
                    .flat_map(|a| rm.iter().map(move |b| (a, b, true)))
                    .chain(rm.iter().flat_map(|a| lm.iter().map(move |b| (a, b, false))))
                {
                    if let (MoveKind::Send { chan: c1, value }, MoveKind::Recv { chan: c2, var }) = (&a.kind, &b.kind) {
                        if c1 == c2 && shared.contains(c1) {
                            let mut next = vals.clone();
                            next.0[*var] = *value;
                            let cfg = if a_left {
                                par(*node, a.cfg.clone(), b.cfg.clone())
                            } else {
                                par(*node, b.cfg.clone(), a.cfg.clone())
                            };
                            out.push(self.tau(false, cfg, next));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Longest delay up to `budget` the configuration admits, ignoring τ
    /// priority. Terminated and blocked-on-communication parts admit any delay.
    pub(crate) fn max_delay_cfg(&self, cfg: &Config, vals: &Vals, budget: f64) -> Result<f64, EvalError> {
        Ok(match cfg {
            Config::Done => budget,
            Config::Par(_, l, r) => {
                let dl = self.max_delay_cfg(l, vals, budget)?;
                dl.min(self.max_delay_cfg(r, vals, dl)?)
            }
            Config::Seq(stack) => match stack.last() {
                Some(Frame::Wait(bits)) => budget.min(f64::from_bits(*bits)),
                Some(Frame::Run(n)) => match &self.nodes[*n] {
                    Node::Stop | Node::Comm(_) | Node::ExtChoice(_) => budget,
                    Node::Wait(e) => budget.min(e.eval(&vals.0)?.max(0.0)),
                    Node::Ode { ode, .. } => ode_max_delay(&self.odes[*ode], vals, budget)?,
                    _ => 0.0,
                },
                _ => 0.0,
            },
        })
    }

    pub(crate) fn apply_delay_cfg(&self, cfg: &Config, vals: &mut Vals, d: f64) -> Result<Config, EvalError> {
        Ok(match cfg {
            Config::Done => Config::Done,
            Config::Par(n, l, r) => {
                let l2 = self.apply_delay_cfg(l, vals, d)?;
                let r2 = self.apply_delay_cfg(r, vals, d)?;
                par(*n, l2, r2)
            }
            Config::Seq(stack) => {
                let remaining = |total: f64| {
                    let mut s = stack[..stack.len() - 1].to_vec();
                    let rem = total - d;
                    s.push(Frame::Wait(if rem > TIME_EPS { rem } else { 0.0 }.to_bits()));
                    normalize(self, s)
                };
                match stack.last() {
                    Some(Frame::Wait(bits)) => remaining(f64::from_bits(*bits)),
                    Some(Frame::Run(n)) => match &self.nodes[*n] {
                        Node::Wait(e) => remaining(e.eval(&vals.0)?),
                        Node::Ode { ode, .. } => {
                            ode_advance(&self.odes[*ode], vals, d)?;
                            cfg.clone()
                        }
                        _ => cfg.clone(),
                    },
                    _ => cfg.clone(),
                }
            }
        })
    }

    fn wrap_err(&self, q: &State) -> impl Fn(EvalError) -> SemError + '_ {
        let rendered = self.render(q);
        move |error| SemError::Eval { error, state: rendered.clone() }
    }

    /// The subterms about to run in each sequential component of `q`.
    pub fn active_terms(&self, q: &State) -> Vec<&ProcessTerm> {
        fn walk<'a>(prog: &'a Program, cfg: &Config, out: &mut Vec<&'a ProcessTerm>) {
            match cfg {
                Config::Done => {}
                Config::Seq(stack) => {
                    if let Some(Frame::Run(n)) = stack.last() {
                        out.push(&prog.terms[*n]);
                    }
                }
                Config::Par(_, l, r) => {
                    walk(prog, l, out);
                    walk(prog, r, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &q.cfg, &mut out);
        out
    }

    /// Human-readable rendering of a state: residual term and valuation.
    pub fn render(&self, q: &State) -> String {
        let term = match q.cfg.residual(self) {
            Some(t) => t.to_string(),
            None => "ε".to_string(),
        };
        let vals: Vec<String> =
            self.vars().iter().zip(&q.vals.0).map(|(x, v)| format!("{x}={}", crate::syntax::format_num(*v))).collect();
        format!("({term}, {{{}}})", vals.join(", "))
    }

    /// τ successors of `q` after readiness-assignment priority: when some
    /// readiness assignment can fire, only those are kept.
    pub fn tau_successors(&self, q: &State) -> Result<Vec<State>, SemError> {
        let moves = self.moves(&q.cfg, &q.vals).map_err(self.wrap_err(q))?;
        Ok(Self::prioritized_taus(moves))
    }

    fn prioritized_taus(moves: Vec<Move>) -> Vec<State> {
        let any_urgent = moves.iter().any(|m| matches!(m.kind, MoveKind::Tau { urgent: true }));
        moves
            .into_iter()
            .filter(|m| match m.kind {
                MoveKind::Tau { urgent } => urgent || !any_urgent,
                _ => false,
            })
            .map(|m| State { cfg: m.cfg, vals: m.vals })
            .collect()
    }

    /// Every transition the rules permit from `q`, with delays capped at
    /// `budget` seconds. Inputs on channels without a partner take each
    /// value of `menu[chan]`.
    pub fn enabled_with(
        &self,
        q: &State,
        budget: f64,
        menu: &BTreeMap<String, Vec<f64>>,
    ) -> Result<Vec<(Label, State)>, SemError> {
        if q.is_terminated() {
            return Ok(Vec::new());
        }
        let err = self.wrap_err(q);
        let moves = self.moves(&q.cfg, &q.vals).map_err(&err)?;
        let mut out = Vec::new();
        for m in &moves {
            match &m.kind {
                MoveKind::Send { chan, value } => out.push((
                    Label::Comm { chan: self.chan_name(*chan).to_string(), dir: Dir::Output, value: *value },
                    State { cfg: m.cfg.clone(), vals: m.vals.clone() },
                )),
                MoveKind::Recv { chan, var } => {
                    let name = self.chan_name(*chan);
                    for &value in menu.get(name).map(|v| v.as_slice()).unwrap_or(&[]) {
                        let mut vals = m.vals.clone();
                        vals.0[*var] = value;
                        out.push((
                            Label::Comm { chan: name.to_string(), dir: Dir::Input, value },
                            State { cfg: m.cfg.clone(), vals },
                        ));
                    }
                }
                MoveKind::Tau { .. } => {}
            }
        }
        let taus = Self::prioritized_taus(moves);
        let has_tau = !taus.is_empty();
        let mut result: Vec<(Label, State)> = taus.into_iter().map(|s| (Label::Tau, s)).collect();
        result.extend(out);
        if !has_tau && budget > 0.0 {
            let d = self.max_delay_cfg(&q.cfg, &q.vals, budget).map_err(&err)?.min(budget);
            if d > TIME_EPS {
                let mut vals = q.vals.clone();
                let cfg = self.apply_delay_cfg(&q.cfg, &mut vals, d).map_err(&err)?;
                result.push((Label::delay(d), State { cfg, vals }));
            }
        }
        Ok(result)
    }

    /// [`Program::enabled_with`] with no input values for dangling channels.
    pub fn enabled(&self, q: &State, budget: f64) -> Result<Vec<(Label, State)>, SemError> {
        self.enabled_with(q, budget, &BTreeMap::new())
    }

    /// Longest delay up to `budget` that `q` admits; 0 when a τ is enabled.
    pub fn max_delay(&self, q: &State, budget: f64) -> Result<f64, SemError> {
        if q.is_terminated() || !self.tau_successors(q)?.is_empty() {
            return Ok(0.0);
        }
        self.max_delay_cfg(&q.cfg, &q.vals, budget).map_err(self.wrap_err(q))
    }

    /// The state after delaying exactly `d`, or `None` if `q` cannot delay
    /// that long. A zero delay is the identity.
    pub fn delay_by(&self, q: &State, d: f64) -> Result<Option<State>, SemError> {
        if d == 0.0 {
            return Ok(Some(q.clone()));
        }
        if self.max_delay(q, d)? + TIME_EPS < d {
            return Ok(None);
        }
        let mut vals = q.vals.clone();
        let cfg = self.apply_delay_cfg(&q.cfg, &mut vals, d).map_err(self.wrap_err(q))?;
        Ok(Some(State { cfg, vals }))
    }
}
