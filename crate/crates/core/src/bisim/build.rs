use std::collections::{BTreeMap, BTreeSet};

use crate::eval::eval_in;
use crate::numerics::{estimate_equilibrium_time, locate_equilibrium, OdeField, DEFAULT_GAS_HORIZON};
use crate::semantics::{explore, ExploreOptions, Label, Program, TransitionSystem, DEFAULT_STATE_CAP};
use crate::syntax::{is_readiness_var, vars, Expr, ProcessTerm};
use crate::{EquilibriumTimes, Valuation};

use super::{BisimError, BoundedTS};

/// Name of the elapsed-time variable attached to the ODE `ode`. The `@`
/// keeps it out of the surface syntax.
pub fn clock_var(ode: &str) -> String {
    format!("t@{ode}")
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Delay budget per transition, in seconds.
    pub step: f64,
    /// Equilibrium time per ODE name. Missing entries are estimated at
    /// precision `tmap_eps` when that is set, and are an error otherwise.
    pub tmap: EquilibriumTimes,
    pub tmap_eps: Option<f64>,
    pub state_cap: usize,
    /// Observed variables; defaults to every non-readiness variable.
    pub observe: Option<Vec<String>>,
    pub menu: BTreeMap<String, Vec<f64>>,
}

impl BuildOptions {
    pub fn new(step: f64) -> BuildOptions {
        BuildOptions {
            step,
            tmap: EquilibriumTimes::new(),
            tmap_eps: None,
            state_cap: DEFAULT_STATE_CAP,
            observe: None,
            menu: BTreeMap::new(),
        }
    }
}

/// A built system: the compiled (clock-instrumented) program, its explored
/// states, and the detached bounded system.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub program: Program,
    pub ts: TransitionSystem,
    pub bounded: BoundedTS,
}

pub(crate) fn default_observables(p: &ProcessTerm) -> BTreeSet<String> {
    vars(p).into_iter().filter(|v| !is_readiness_var(v)).collect()
}

/// Puts `t@name := 0` before every ODE and adds `t@name_dot = 1` to it.
fn add_clocks(p: &ProcessTerm) -> ProcessTerm {
    let rec = |q: &ProcessTerm| Box::new(add_clocks(q));
    let branches = |bs: &[(crate::syntax::CommEvent, ProcessTerm)]| {
        bs.iter().map(|(ev, q)| (ev.clone(), add_clocks(q))).collect::<Vec<_>>()
    };
    match p {
        ProcessTerm::Seq(a, b) => ProcessTerm::Seq(rec(a), rec(b)),
        ProcessTerm::IntChoice(a, b) => ProcessTerm::IntChoice(rec(a), rec(b)),
        ProcessTerm::Parallel(a, b) => ProcessTerm::Parallel(rec(a), rec(b)),
        ProcessTerm::Guard(b, q) => ProcessTerm::Guard(b.clone(), rec(q)),
        ProcessTerm::Repeat(q, n) => ProcessTerm::Repeat(rec(q), n.clone()),
        ProcessTerm::ExtChoice(bs) => ProcessTerm::ExtChoice(branches(bs)),
        ProcessTerm::Ode(spec, dom) | ProcessTerm::OdeInterrupt(spec, dom, _) => {
            let clock = clock_var(spec.name.as_deref().expect("ODEs are named before instrumentation"));
            let mut timed = spec.clone();
            timed.equations.push((clock.clone(), Expr::Num(1.0)));
            let ode = match p {
                ProcessTerm::OdeInterrupt(_, _, bs) => ProcessTerm::OdeInterrupt(timed, dom.clone(), branches(bs)),
                _ => ProcessTerm::Ode(timed, dom.clone()),
            };
            ProcessTerm::seq(ProcessTerm::assign(clock, Expr::Num(0.0)), ode)
        }
        other => other.clone(),
    }
}

/// Equilibrium time of every ODE of `p` at precision `eps`, starting from
/// `v0`. Certificates supplying a time take precedence; otherwise the
/// equilibrium comes from the certificate or is located by simulation.
pub fn estimate_tmap(p: &ProcessTerm, v0: &Valuation, eps: f64) -> Result<EquilibriumTimes, BisimError> {
    let mut p = p.clone();
    p.name_odes();
    let mut specs = Vec::new();
    p.for_each_ode(&mut |spec, _| specs.push(spec.clone()));
    let mut out = EquilibriumTimes::new();
    for spec in specs {
        let name = spec.name.clone().unwrap_or_default();
        if out.contains_key(&name) {
            continue;
        }
        if let Some(t) = spec.cert.as_ref().and_then(|c| c.equilibrium_time) {
            out.insert(name, t);
            continue;
        }
        let err = |message: String| BisimError::Equilibrium { ode: name.clone(), message };
        let mut context = v0.clone();
        for v in vars(&p) {
            context.entry(v).or_insert(0.0);
        }
        let field = OdeField::new(&spec, &context).map_err(|e| err(e.to_string()))?;
        let x0 = field.point(&context).map_err(|e| err(e.to_string()))?;
        let xbar = match &spec.cert {
            Some(c) if !c.equilibrium.is_empty() => c
                .equilibrium
                .iter()
                .map(|e| eval_in(e, &context))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(e.to_string()))?,
            _ => locate_equilibrium(&field, &x0, 1e-9, DEFAULT_GAS_HORIZON)?,
        };
        out.insert(name, estimate_equilibrium_time(&field, &x0, &xbar, eps)?);
    }
    Ok(out)
}

/// Explores `(p, v0)` into a bounded, τ-compressed transition system.
/// Every ODE carries a clock reset on entry; a delay whose destination has
/// some clock at or beyond that ODE's equilibrium time is suppressed.
pub fn build_ts(p: &ProcessTerm, v0: &Valuation, opts: &BuildOptions) -> Result<Exploration, BisimError> {
    let mut named = p.clone();
    named.name_odes();
    let mut names = BTreeSet::new();
    named.for_each_ode(&mut |spec, _| {
        names.insert(spec.name.clone().unwrap_or_default());
    });
    let mut tmap = opts.tmap.clone();
    let missing: Vec<&String> = names.iter().filter(|n| !tmap.contains_key(*n)).collect();
    if !missing.is_empty() {
        match opts.tmap_eps {
            Some(eps) => {
                let estimated = estimate_tmap(&named, v0, eps)?;
                for n in missing {
                    tmap.insert(n.clone(), estimated[n]);
                }
            }
            None => return Err(BisimError::MissingEquilibriumTime(missing[0].clone())),
        }
    }
    let observe: Vec<String> = match &opts.observe {
        Some(v) => v.clone(),
        None => default_observables(&named).into_iter().collect(),
    };
    let instrumented = add_clocks(&named);
    let program = Program::compile(&instrumented, &[])?;
    for v in &observe {
        if program.slot(v).is_none() {
            return Err(BisimError::UnknownObservation(v.clone()));
        }
    }
    let clocks: Vec<(usize, f64)> =
        names.iter().map(|n| (program.slot(&clock_var(n)).expect("clock compiled"), tmap[n])).collect();
    let explore_opts =
        ExploreOptions { step: opts.step, state_cap: opts.state_cap, compress: true, menu: opts.menu.clone() };
    let ts = explore(&program, v0, &explore_opts, &mut |label, dst| {
        !matches!(label, Label::Delay { .. }) || clocks.iter().all(|&(slot, t)| dst.vals.0[slot] < t)
    })?;
    let observations =
        ts.states.iter().map(|s| program.observe(s, &observe).expect("observed slots checked")).collect();
    let bounded = BoundedTS {
        obs_vars: observe,
        observations,
        adj: ts.adj.clone(),
        initial: ts.initial(),
        truncated: ts.truncated.clone(),
    };
    Ok(Exploration { program, ts, bounded })
}
