use std::collections::BTreeMap;

use crate::syntax::{
    is_readiness_var, readiness_var, written_vars, BoolExpr, CommEvent, Dir, Expr, OdeSpec, ProcessTerm, RepeatBound,
};
use crate::EquilibriumTimes;

use super::{neighborhood, DiscretizeError};

/// Readiness variables of a discretized system and the top-level parallel
/// component that writes each of them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReadinessEnv {
    pub owners: BTreeMap<String, usize>,
}

impl ReadinessEnv {
    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.owners.keys()
    }

    pub fn owner(&self, var: &str) -> Option<usize> {
        self.owners.get(var).copied()
    }
}

/// Collects the readiness variables of `p` per parallel component; fails if
/// two components write the same one.
pub fn readiness_env(p: &ProcessTerm) -> Result<ReadinessEnv, DiscretizeError> {
    let mut env = ReadinessEnv::default();
    for (i, comp) in p.parallel_components().into_iter().enumerate() {
        for v in written_vars(comp).into_iter().filter(|v| is_readiness_var(v)) {
            if let Some(prev) = env.owners.insert(v.clone(), i) {
                if prev != i {
                    return Err(DiscretizeError::SharedReadinessWriter(v));
                }
            }
        }
    }
    Ok(env)
}

/// `D(P)`: replaces every ODE of `p` by an Euler loop with step `h` and
/// marks every communication with readiness variables. ODE domains are
/// widened to their ε-neighbourhood; each ODE needs an equilibrium point in
/// its certificate and an equilibrium time in `tmap` (keyed by ODE name,
/// unnamed ODEs being numbered `ode1`, `ode2`, ... in pre-order).
pub fn discretize(p: &ProcessTerm, h: f64, eps: f64, tmap: &EquilibriumTimes) -> Result<ProcessTerm, DiscretizeError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(DiscretizeError::InvalidStep(h));
    }
    let mut named = p.clone();
    named.name_odes();
    Rules { h, eps, tmap }.apply(&named)
}

struct Rules<'a> {
    h: f64,
    eps: f64,
    tmap: &'a EquilibriumTimes,
}

fn flag(name: String) -> BoolExpr {
    BoolExpr::Flag(name)
}

fn set_flags(names: &[String], value: f64) -> Vec<ProcessTerm> {
    names.iter().map(|n| ProcessTerm::assign(n.clone(), Expr::Num(value))).collect()
}

/// `b -> p`, dropping the guard when it is constant.
fn guarded(b: BoolExpr, p: ProcessTerm) -> ProcessTerm {
    match b.simplify() {
        BoolExpr::True => p,
        BoolExpr::False => ProcessTerm::Skip,
        b => ProcessTerm::guard(b, p),
    }
}

/// Sequence with `skip` steps removed.
fn steps(items: Vec<ProcessTerm>) -> ProcessTerm {
    ProcessTerm::seq_all(items.into_iter().filter(|p| *p != ProcessTerm::Skip))
}

fn own_flag(ev: &CommEvent) -> String {
    readiness_var(ev.chan(), ev.dir())
}

fn dual_flag(ev: &CommEvent) -> String {
    readiness_var(ev.chan(), ev.dir().dual())
}

impl Rules<'_> {
    fn apply(&self, p: &ProcessTerm) -> Result<ProcessTerm, DiscretizeError> {
        let rec = |q: &ProcessTerm| self.apply(q).map(Box::new);
        Ok(match p {
            ProcessTerm::Skip
            | ProcessTerm::Stop
            | ProcessTerm::Assign(..)
            | ProcessTerm::VecAssign(_)
            | ProcessTerm::Wait(_) => p.clone(),
            ProcessTerm::Input(c, _) => self.marked(&[readiness_var(c, Dir::Input)], p.clone()),
            ProcessTerm::Output(c, _) => self.marked(&[readiness_var(c, Dir::Output)], p.clone()),
            ProcessTerm::Seq(a, b) => ProcessTerm::Seq(rec(a)?, rec(b)?),
            ProcessTerm::IntChoice(a, b) => ProcessTerm::IntChoice(rec(a)?, rec(b)?),
            ProcessTerm::Parallel(a, b) => ProcessTerm::Parallel(rec(a)?, rec(b)?),
            ProcessTerm::Guard(b, q) => ProcessTerm::Guard(b.clone(), rec(q)?),
            ProcessTerm::Repeat(q, n) => ProcessTerm::Repeat(rec(q)?, n.clone()),
            ProcessTerm::ExtChoice(branches) => {
                let flags = self.flags_of(branches);
                let mut items = set_flags(&flags, 1.0);
                items.push(self.choice(branches, &flags)?);
                steps(items)
            }
            ProcessTerm::Ode(spec, dom) => {
                let (euler, settle, nb) = self.euler_parts(spec, dom)?;
                steps(vec![ProcessTerm::Repeat(Box::new(guarded(nb.clone(), euler.0)), euler.1), guarded(nb, settle)])
            }
            ProcessTerm::OdeInterrupt(spec, dom, branches) => {
                let (euler, settle, nb) = self.euler_parts(spec, dom)?;
                let flags = self.flags_of(branches);
                let none_ready = BoolExpr::all(
                    branches
                        .iter()
                        .map(|(ev, _)| BoolExpr::and(flag(own_flag(ev)), BoolExpr::not(flag(dual_flag(ev))))),
                );
                let some_ready = BoolExpr::any(
                    branches.iter().map(|(ev, _)| BoolExpr::and(flag(own_flag(ev)), flag(dual_flag(ev)))),
                );
                let mut items = set_flags(&flags, 1.0);
                items.push(ProcessTerm::Repeat(
                    Box::new(guarded(nb.clone(), guarded(none_ready.clone(), euler.0))),
                    euler.1,
                ));
                items.push(guarded(
                    BoolExpr::and(BoolExpr::not(nb.clone()), none_ready.clone()),
                    steps(set_flags(&flags, 0.0)),
                ));
                items.push(guarded(some_ready, self.choice(branches, &flags)?));
                items.push(guarded(BoolExpr::and(nb, none_ready), settle));
                steps(items)
            }
        })
    }

    /// `io := 1; p; io := 0` for a communication `p`.
    fn marked(&self, flags: &[String], p: ProcessTerm) -> ProcessTerm {
        let mut items = set_flags(flags, 1.0);
        items.push(p);
        items.extend(set_flags(flags, 0.0));
        steps(items)
    }

    fn flags_of(&self, branches: &[(CommEvent, ProcessTerm)]) -> Vec<String> {
        let mut flags: Vec<String> = Vec::new();
        for (ev, _) in branches {
            let f = own_flag(ev);
            if !flags.contains(&f) {
                flags.push(f);
            }
        }
        flags
    }

    /// `[] (io_i; all io := 0; D(Q_i))`; a single branch becomes a plain
    /// prefix.
    fn choice(&self, branches: &[(CommEvent, ProcessTerm)], flags: &[String]) -> Result<ProcessTerm, DiscretizeError> {
        let mut out = Vec::with_capacity(branches.len());
        for (ev, q) in branches {
            let mut cont = set_flags(flags, 0.0);
            cont.push(self.apply(q)?);
            out.push((ev.clone(), steps(cont)));
        }
        if out.len() == 1 {
            let (ev, cont) = out.pop().expect("one branch");
            return Ok(steps(vec![ev.as_process(), cont]));
        }
        Ok(ProcessTerm::ExtChoice(out))
    }

    /// The Euler step `x := x + h*f(x); wait h` with its iteration count,
    /// the settling step `x := x̄; stop`, and the widened domain.
    fn euler_parts(
        &self,
        spec: &OdeSpec,
        dom: &BoolExpr,
    ) -> Result<((ProcessTerm, RepeatBound), ProcessTerm, BoolExpr), DiscretizeError> {
        let name = spec.name.clone().unwrap_or_default();
        let eq = match &spec.cert {
            Some(c) if c.equilibrium.len() == spec.equations.len() => c.equilibrium.clone(),
            _ => return Err(DiscretizeError::MissingCertificate(name)),
        };
        let t = *self.tmap.get(&name).ok_or_else(|| DiscretizeError::MissingEquilibriumTime(name.clone()))?;
        let count = (t / self.h).ceil();
        if !(0.0..=f64::from(u32::MAX)).contains(&count) {
            return Err(DiscretizeError::InvalidStep(self.h));
        }
        let update: Vec<(String, Expr)> = spec
            .equations
            .iter()
            .map(|(x, f)| (x.clone(), Expr::add(Expr::var(x.clone()), Expr::mul(Expr::Num(self.h), f.clone()))))
            .collect();
        let euler = ProcessTerm::seq(assign_all(update), ProcessTerm::Wait(Expr::Num(self.h)));
        let vars = spec.vars();
        let settle = ProcessTerm::seq(assign_all(vars.into_iter().zip(eq).collect()), ProcessTerm::Stop);
        let nb = neighborhood(dom, self.eps)?.simplify();
        Ok(((euler, RepeatBound::literal(count as u32)), settle, nb))
    }
}

fn assign_all(mut pairs: Vec<(String, Expr)>) -> ProcessTerm {
    if pairs.len() == 1 {
        let (x, e) = pairs.pop().expect("one pair");
        ProcessTerm::Assign(x, e)
    } else {
        ProcessTerm::VecAssign(pairs)
    }
}
