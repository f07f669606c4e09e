use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::Serialize;

use crate::eval::{eval_bool_in, eval_in, EvalError};
use crate::numerics::{integrate, OdeField, MAX_SUBSTEP};
use crate::semantics::{Label, Program, State, BOUNDARY_LOOKAHEAD, DEFAULT_STATE_CAP};
use crate::syntax::{is_readiness_var, ode_vars, vars, written_vars, BoolExpr, CmpOp, OdeSpec, ProcessTerm};
use crate::Valuation;

use super::{nnf, shrink, DiscretizeError};

/// Slack kept below ε when testing "farther than ε from the boundary", so
/// that a margin of exactly ε is not lost to rounding.
const BOUNDARY_SLACK: f64 = 1e-9;

/// Samples per δ window when searching for a robust escape.
const ESCAPE_SAMPLES: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Robust,
    Violated,
    Inconclusive,
}

/// A failed check, located in the explored state space.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    /// 1: an ODE leaves its domain without entering the robust
    /// complement within δ; 2: a guard is decided within ε of its boundary.
    pub clause: u8,
    /// The subterm being executed.
    pub location: String,
    pub time: f64,
    pub valuation: Valuation,
    /// Distance beyond ε by which the check passed (negative: failed).
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustSafetyReport {
    pub verdict: Verdict,
    pub eps: f64,
    pub delta: f64,
    pub checks: usize,
    /// Smallest margin over all checks; `None` when nothing was checked.
    pub min_margin: Option<f64>,
    pub states_explored: usize,
    pub budget_exhausted: bool,
    pub witnesses: Vec<Witness>,
}

/// Exploration limits for the monitor.
#[derive(Debug, Clone)]
pub struct MonitorBudget {
    /// Delay budget per transition.
    pub step: f64,
    /// Simulated-time bound; states beyond it are not expanded.
    pub horizon: Option<f64>,
    pub max_states: usize,
    pub menu: BTreeMap<String, Vec<f64>>,
}

impl Default for MonitorBudget {
    fn default() -> MonitorBudget {
        MonitorBudget { step: 0.1, horizon: None, max_states: DEFAULT_STATE_CAP, menu: BTreeMap::new() }
    }
}

/// Signed distance-like robustness of `b` at `env`: positive iff `b` holds,
/// with magnitude the smallest slack of a deciding atom.
pub fn robustness(b: &BoolExpr, env: &Valuation) -> Result<f64, DiscretizeError> {
    fn go(b: &BoolExpr, env: &Valuation) -> Result<f64, DiscretizeError> {
        Ok(match b {
            BoolExpr::True => f64::INFINITY,
            BoolExpr::False => f64::NEG_INFINITY,
            BoolExpr::Cmp(op, l, r) => {
                let (l, r) = (eval_in(l, env)?, eval_in(r, env)?);
                match op {
                    CmpOp::Lt | CmpOp::Le => r - l,
                    CmpOp::Gt | CmpOp::Ge => l - r,
                    CmpOp::Eq | CmpOp::Ne => return Err(DiscretizeError::EqualityAtom(b.to_string())),
                }
            }
            BoolExpr::Flag(_) | BoolExpr::Not(_) => {
                if eval_bool_in(b, env)? {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            BoolExpr::And(a, c) => go(a, env)?.min(go(c, env)?),
            BoolExpr::Or(a, c) => go(a, env)?.max(go(c, env)?),
        })
    }
    go(&nnf(b, false), env)
}

/// Variables whose values come from continuous evolution or the
/// environment: ODE variables and variables the process never writes.
fn continuous_vars(p: &ProcessTerm) -> BTreeSet<String> {
    let written = written_vars(p);
    let mut out = ode_vars(p);
    out.extend(vars(p).into_iter().filter(|v| !written.contains(v)));
    out.retain(|v| !is_readiness_var(v));
    out
}

struct Monitor<'a> {
    eps: f64,
    delta: f64,
    continuous: BTreeSet<String>,
    checks: usize,
    min_margin: Option<f64>,
    witnesses: Vec<Witness>,
    program: &'a Program,
}

impl Monitor<'_> {
    fn record(&mut self, clause: u8, term: &ProcessTerm, time: f64, env: &Valuation, margin: f64) {
        self.checks += 1;
        self.min_margin = Some(self.min_margin.map_or(margin, |m| m.min(margin)));
        if margin <= 0.0 {
            self.witnesses.push(Witness { clause, location: term.to_string(), time, valuation: env.clone(), margin });
        }
    }

    /// A guard over continuous variables must be decided with margin ε.
    fn check_guard(
        &mut self,
        b: &BoolExpr,
        term: &ProcessTerm,
        time: f64,
        env: &Valuation,
    ) -> Result<(), DiscretizeError> {
        let mut used = BTreeSet::new();
        b.collect_vars(&mut used);
        if used.is_disjoint(&self.continuous) {
            return Ok(());
        }
        let inner = self.eps - BOUNDARY_SLACK;
        let decided =
            eval_bool_in(&shrink(b, inner)?, env)? || eval_bool_in(&shrink(&BoolExpr::not(b.clone()), inner)?, env)?;
        let rho = robustness(b, env)?.abs();
        let margin = if decided { (rho - self.eps).max(0.0) } else { (rho - self.eps).min(0.0) };
        self.record(2, term, time, env, margin);
        Ok(())
    }

    /// At an ODE escape, the flow continued past the boundary must put an
    /// ε-ball inside the shrunk complement of the domain within δ.
    fn check_escape(
        &mut self,
        spec: &OdeSpec,
        dom: &BoolExpr,
        term: &ProcessTerm,
        time: f64,
        env: &Valuation,
    ) -> Result<(), DiscretizeError> {
        if matches!(dom.simplify(), BoolExpr::True) {
            return Ok(());
        }
        let field = OdeField::new(spec, env)?;
        let x = field.point(env)?;
        let ahead = integrate(&field, &x, BOUNDARY_LOOKAHEAD, MAX_SUBSTEP).ok();
        let at = |p: &[f64]| {
            let mut e = env.clone();
            for (v, val) in field.vars().iter().zip(p) {
                e.insert(v.clone(), *val);
            }
            e
        };
        let inside_now = eval_bool_in(dom, env)?;
        let inside_ahead = match &ahead {
            Some(p) => eval_bool_in(dom, &at(p))?,
            None => false,
        };
        if inside_now && inside_ahead {
            return Ok(());
        }
        let outside = shrink(&BoolExpr::not(dom.clone()), self.eps)?;
        let complement = BoolExpr::not(dom.clone());
        let radius = self.eps * (1.0 - BOUNDARY_SLACK);
        let n = x.len();
        let mut best = f64::NEG_INFINITY;
        for k in 1..ESCAPE_SAMPLES {
            let t_hat = self.delta * f64::from(k) / f64::from(ESCAPE_SAMPLES);
            let Ok(center) = integrate(&field, &x, t_hat, MAX_SUBSTEP) else { break };
            let mut worst = f64::INFINITY;
            let mut all_in = true;
            for point in ball_samples(&center, radius, n) {
                let e = at(&point);
                let ok = eval_bool_in(&outside, &e).unwrap_or(false);
                all_in &= ok;
                worst = worst.min(robustness(&complement, &e).unwrap_or(f64::NEG_INFINITY));
            }
            let margin = if all_in { (worst - self.eps).max(0.0) } else { (worst - self.eps).min(0.0) };
            best = best.max(margin);
            if all_in {
                break;
            }
        }
        self.record(1, term, time, env, best);
        Ok(())
    }

    fn visit(&mut self, q: &State, time: f64) -> Result<(), DiscretizeError> {
        let env = self.program.valuation(q);
        for term in self.program.active_terms(q) {
            match term {
                ProcessTerm::Guard(b, _) => self.check_guard(b, term, time, &env)?,
                ProcessTerm::Ode(spec, dom) | ProcessTerm::OdeInterrupt(spec, dom, _) => {
                    self.check_escape(spec, dom, term, time, &env)?
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// The center and the corners of the cube of half-width `r` around `c`
/// (axis points instead of corners above ten dimensions).
fn ball_samples(c: &[f64], r: f64, n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![c.to_vec()];
    if n <= 10 {
        for mask in 0..(1u32 << n) {
            out.push((0..n).map(|i| if mask >> i & 1 == 1 { c[i] + r } else { c[i] - r }).collect());
        }
    } else {
        for i in 0..n {
            for s in [-r, r] {
                let mut p = c.to_vec();
                p[i] += s;
                out.push(p);
            }
        }
    }
    out
}

/// Explores `(p, v0)` and checks ε-robust safety: every guard over
/// continuous variables is decided at least ε away from its boundary, and
/// every ODE that leaves its domain gets an ε-ball strictly into the
/// complement within `delta`. `Robust` requires exhausting the reachable
/// states within `budget`.
pub fn check_robust_safety(
    p: &ProcessTerm,
    v0: &Valuation,
    eps: f64,
    delta: f64,
    budget: &MonitorBudget,
) -> Result<RobustSafetyReport, DiscretizeError> {
    let program = Program::compile(p, &[])?;
    let mut monitor = Monitor {
        eps,
        delta,
        continuous: continuous_vars(p),
        checks: 0,
        min_margin: None,
        witnesses: Vec::new(),
        program: &program,
    };
    let start = program.initial_state(v0);
    let mut seen: HashSet<State> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0.0f64)]);
    let mut exhausted = false;
    while let Some((q, time)) = queue.pop_front() {
        if budget.horizon.is_some_and(|hz| time > hz) {
            exhausted = true;
            continue;
        }
        monitor.visit(&q, time)?;
        for (label, next) in program.enabled_with(&q, budget.step, &budget.menu)? {
            let t = match label {
                Label::Delay { d } => time + d,
                _ => time,
            };
            if seen.contains(&next) {
                continue;
            }
            if seen.len() >= budget.max_states {
                exhausted = true;
                break;
            }
            seen.insert(next.clone());
            queue.push_back((next, t));
        }
    }
    let verdict = if !monitor.witnesses.is_empty() {
        Verdict::Violated
    } else if exhausted {
        Verdict::Inconclusive
    } else {
        Verdict::Robust
    };
    Ok(RobustSafetyReport {
        verdict,
        eps,
        delta,
        checks: monitor.checks,
        min_margin: monitor.min_margin,
        states_explored: seen.len(),
        budget_exhausted: exhausted,
        witnesses: monitor.witnesses,
    })
}

impl From<EvalError> for DiscretizeError {
    fn from(e: EvalError) -> DiscretizeError {
        DiscretizeError::Numerics(e.to_string())
    }
}
