use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use hcsp::bisim::{approx_bisimilar, build_ts, estimate_tmap, BuildOptions};
use hcsp::discretize::{check_robust_safety, discretize, MonitorBudget, Verdict};
use hcsp::numerics::{
    choose_step, estimate_constants, step_condition_lhs, ErrorBudget, OdeField, StepRequest, DEFAULT_BASE_STEP,
};
use hcsp::reach::{reachable, safety, samples_csv, widen, Interval, ReachBox, SafetyVerdict};
use hcsp::semantics::{Label, Program};
use hcsp::syntax::{is_readiness_var, pretty, validate, Model, ProcessTerm, StabilityCert};
use hcsp::{EquilibriumTimes, Valuation};

use crate::load::{equilibrium_times, intervals, load, Loaded};
use crate::{Command, ExploreArgs, ModelArgs, Outcome, Precision};

fn write_artifact(path: Option<&Path>, text: &str) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn pretty_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Parse { model, emit_json } => parse_cmd(&model, emit_json.as_deref()),
        Command::Simulate { model, d, until, state_cap, emit_csv } => {
            simulate(&model, d, until, state_cap, emit_csv.as_deref())
        }
        Command::Discretize { model, precision, output } => {
            let loaded = load(&model)?;
            let (h, tmap) = resolve(&loaded, &precision)?;
            let d = discretize(&loaded.system, h, precision.eps, &tmap)?;
            let text = render_discretized(&loaded, d);
            match output {
                Some(p) => write_artifact(Some(&p), &text)?,
                None => print!("{text}"),
            }
            Ok(Outcome::Success)
        }
        Command::Bisim { model, precision, explore, other, emit_json } => {
            bisim_cmd(&model, &precision, &explore, other.as_deref(), emit_json.as_deref())
        }
        Command::Reach { model, precision, explore, direct, emit_json, emit_csv } => {
            let loaded = load(&model)?;
            let (report, _) = reach_report(&loaded, &precision, &explore, direct, None, emit_csv.as_deref())?;
            let text = pretty_json(&report);
            print!("{text}");
            write_artifact(emit_json.as_deref(), &text)?;
            Ok(Outcome::Success)
        }
        Command::Verify { model, precision, explore, safe, emit_json, emit_csv } => {
            let loaded = load(&model)?;
            let safe = intervals(&safe)?;
            let (mut report, reach) =
                reach_report(&loaded, &precision, &explore, false, Some(&safe), emit_csv.as_deref())?;
            let verdict = safety(&reach, &safe, precision.eps)?;
            report["safe"] = json!(safe.iter().map(|(k, i)| (k.clone(), [i.lo, i.hi])).collect::<BTreeMap<_, _>>());
            report["verdict"] = json!(verdict.to_string());
            let text = pretty_json(&report);
            print!("{text}");
            write_artifact(emit_json.as_deref(), &text)?;
            Ok(if verdict == SafetyVerdict::Safe { Outcome::Success } else { Outcome::Negative })
        }
        Command::Robust { model, eps, delta, d, until, state_cap, emit_json } => {
            let loaded = load(&model)?;
            let budget = MonitorBudget { step: d, horizon: until, max_states: state_cap, menu: loaded.menu.clone() };
            let report = check_robust_safety(&loaded.system, &loaded.init, eps, delta, &budget)?;
            let text = pretty_json(&serde_json::to_value(&report)?);
            print!("{text}");
            write_artifact(emit_json.as_deref(), &text)?;
            Ok(if report.verdict == Verdict::Robust { Outcome::Success } else { Outcome::Negative })
        }
    }
}

fn parse_cmd(args: &ModelArgs, emit_json: Option<&Path>) -> Result<Outcome> {
    let loaded = load(args)?;
    match &loaded.model {
        Some(m) => print!("{}", m.to_hcsp()),
        None => println!("{}", pretty(&loaded.system, 0)),
    }
    for d in validate(&loaded.system) {
        eprintln!("warning: {d}");
    }
    write_artifact(emit_json, &pretty_json(&serde_json::to_value(&loaded.system)?))?;
    Ok(Outcome::Success)
}

/// Follows the first enabled transition from the initial state, recording
/// every non-readiness variable after each step.
fn simulate(args: &ModelArgs, d: f64, until: f64, cap: usize, emit_csv: Option<&Path>) -> Result<Outcome> {
    if d.is_nan() || d <= 0.0 {
        bail!("--d must be positive");
    }
    let loaded = load(args)?;
    let prog = Program::compile(&loaded.system, &[])?;
    let vars: Vec<(usize, String)> =
        prog.vars().iter().enumerate().filter(|(_, v)| !is_readiness_var(v)).map(|(i, v)| (i, v.clone())).collect();
    let mut q = prog.initial_state(&loaded.init);
    let mut time = 0.0;
    let mut csv = String::from("time,variable,value\n");
    let record = |time: f64, vals: &[f64], csv: &mut String| {
        for (i, v) in &vars {
            csv.push_str(&format!("{time},{v},{}\n", vals[*i]));
        }
    };
    record(time, &q.vals.0, &mut csv);
    for _ in 0..cap {
        if time >= until {
            break;
        }
        let Some((label, next)) = prog.enabled_with(&q, d.min(until - time), &loaded.menu)?.into_iter().next() else {
            break;
        };
        if let Label::Delay { d } = label {
            time += d;
        }
        q = next;
        record(time, &q.vals.0, &mut csv);
    }
    match emit_csv {
        Some(_) => write_artifact(emit_csv, &csv)?,
        None => print!("{csv}"),
    }
    Ok(Outcome::Success)
}

/// Equilibrium times (overrides, certificates, then estimates at ε) and the
/// step size (given, or the largest menu step meeting the error bound for
/// every ODE).
fn resolve(loaded: &Loaded, precision: &Precision) -> Result<(f64, EquilibriumTimes)> {
    let eps = precision.eps;
    if eps.is_nan() || eps <= 0.0 {
        bail!("--eps must be positive");
    }
    let mut tmap = EquilibriumTimes::new();
    if loaded.system.has_ode() {
        let overrides = equilibrium_times(&precision.tmap)?;
        let mut trimmed = loaded.system.clone();
        trimmed.name_odes();
        trimmed.for_each_ode_mut(&mut |spec| {
            let Some(t) = spec.name.as_ref().and_then(|n| overrides.get(n)) else { return };
            let cert = spec.cert.get_or_insert_with(|| StabilityCert {
                equilibrium: Vec::new(),
                equilibrium_time: None,
                lipschitz: None,
                second_deriv_bound: None,
                slope_bound: None,
            });
            cert.equilibrium_time = Some(*t);
        });
        tmap = estimate_tmap(&trimmed, &loaded.init, eps)?;
        tmap.extend(overrides);
    }
    let budgets = error_budgets(loaded, &tmap, eps)?;
    if precision.explain_step {
        explain(&budgets, precision.h, eps);
    }
    let h = match precision.h {
        Some(h) if h > 0.0 => h,
        Some(h) => bail!("--h must be positive, got {h}"),
        None => {
            let mut h = f64::INFINITY;
            for (name, b) in &budgets {
                match b {
                    Ok(b) => h = h.min(b.h),
                    Err(e) => bail!("no step size for ODE `{name}`: {e}"),
                }
            }
            if h.is_infinite() {
                DEFAULT_BASE_STEP
            } else {
                h
            }
        }
    };
    log::info!("h = {h}, equilibrium times {tmap:?}");
    Ok((h, tmap))
}

type Budgets = Vec<(String, std::result::Result<ErrorBudget, String>)>;

/// Per ODE, the step chosen from its constants (certificate values where
/// given, otherwise sampled along the trajectory from the initial valuation
/// over its equilibrium time).
fn error_budgets(loaded: &Loaded, tmap: &EquilibriumTimes, eps: f64) -> Result<Budgets> {
    let mut named = loaded.system.clone();
    named.name_odes();
    let mut specs = Vec::new();
    named.for_each_ode(&mut |spec, _| specs.push(spec.clone()));
    let mut context: Valuation = loaded.init.clone();
    for v in hcsp::syntax::vars(&named) {
        context.entry(v).or_insert(0.0);
    }
    let mut out: Budgets = Vec::new();
    for spec in specs {
        let name = spec.name.clone().unwrap_or_default();
        if out.iter().any(|(n, _)| *n == name) {
            continue;
        }
        let horizon = tmap.get(&name).copied().ok_or_else(|| anyhow!("no equilibrium time for `{name}`"))?;
        let budget = (|| -> std::result::Result<ErrorBudget, String> {
            let field = OdeField::new(&spec, &context).map_err(|e| e.to_string())?;
            let x0 = field.point(&context).map_err(|e| e.to_string())?;
            let cert = spec.cert.as_ref();
            let (m, l, m2) = match cert.map(|c| (c.slope_bound, c.lipschitz, c.second_deriv_bound)) {
                Some((Some(m), Some(l), Some(m2))) => (m, l, m2),
                partial => {
                    let (em, el, em2) = estimate_constants(&field, &x0, horizon, eps).map_err(|e| e.to_string())?;
                    let (m, l, m2) = partial.unwrap_or((None, None, None));
                    (m.unwrap_or(em), l.unwrap_or(el), m2.unwrap_or(em2))
                }
            };
            let req = StepRequest {
                lipschitz: l,
                horizon,
                t0: 0.0,
                second_deriv_bound: m2,
                slope_bound: m,
                eps1: None,
                base_step: DEFAULT_BASE_STEP,
            };
            choose_step(eps, &req).map_err(|e| e.to_string())
        })();
        out.push((name, budget));
    }
    Ok(out)
}

fn explain(budgets: &Budgets, given: Option<f64>, eps: f64) {
    for (name, b) in budgets {
        match b {
            Ok(b) => {
                eprintln!(
                    "ode {name}: T={} L={} M2={} M={} eps1={:.6e} -> h={}",
                    b.horizon, b.lipschitz, b.second_deriv_bound, b.slope_bound, b.eps1, b.h
                );
                let at = |h: f64| step_condition_lhs(&ErrorBudget { h, ..*b });
                eprintln!("  M*h + bound = {:.6} <= eps = {eps}: {}", at(b.h), at(b.h) <= eps);
                if let Some(h) = given {
                    eprintln!("  with h={h}: M*h + bound = {:.6} <= eps = {eps}: {}", at(h), at(h) <= eps);
                }
            }
            Err(e) => eprintln!("ode {name}: {e}"),
        }
    }
}

/// The discretized system as model text, keeping the component names of
/// the original `system` line when there is one.
fn render_discretized(loaded: &Loaded, d: ProcessTerm) -> String {
    let Some(m) = &loaded.model else {
        return format!("{}\n", pretty(&d, 0));
    };
    let comps: Vec<ProcessTerm> = d.parallel_components().into_iter().cloned().collect();
    let (defs, names) = match &m.system_names {
        Some(names) if names.len() == comps.len() => (names.iter().cloned().zip(comps).collect(), Some(names.clone())),
        _ => (Vec::new(), None),
    };
    Model {
        consts: m.consts.clone(),
        init: loaded.init.clone(),
        bounds: m.bounds.clone(),
        defs,
        system: d,
        system_names: names,
        warnings: Vec::new(),
    }
    .to_hcsp()
}

fn explore_options(explore: &ExploreArgs, h: f64, loaded: &Loaded) -> BuildOptions {
    let mut o = BuildOptions::new(explore.d.unwrap_or(h));
    o.state_cap = explore.state_cap;
    o.menu = loaded.menu.clone();
    if !explore.observe.is_empty() {
        o.observe = Some(explore.observe.clone());
    }
    o
}

fn bisim_cmd(
    args: &ModelArgs,
    precision: &Precision,
    explore: &ExploreArgs,
    other: Option<&str>,
    emit_json: Option<&Path>,
) -> Result<Outcome> {
    let loaded = load(args)?;
    let (h, tmap) = resolve(&loaded, precision)?;
    let second = match other {
        Some(path) => {
            let other = load(&ModelArgs { model: path.to_string(), ..args.clone() })?;
            let (_, t2) = resolve(&other, &Precision { explain_step: false, ..precision.clone() })?;
            (other.system, t2)
        }
        None => (discretize(&loaded.system, h, precision.eps, &tmap)?, EquilibriumTimes::new()),
    };
    let mut opts = explore_options(explore, h, &loaded);
    opts.tmap = tmap;
    opts.tmap.extend(second.1);
    let started = Instant::now();
    let out = approx_bisimilar(&loaded.system, &second.0, &loaded.init, h, precision.eps, &opts)?;
    log::info!("bisimulation decided in {:?}", started.elapsed());
    let summary = json!({
        "bisimilar": out.bisimilar,
        "h": h,
        "eps": precision.eps,
        "observed": out.first.bounded.obs_vars,
        "stats": out.stats,
    });
    print!("{}", pretty_json(&summary));
    if emit_json.is_some() {
        let mut full = summary;
        full["relation"] = serde_json::from_str(&out.relation.to_json())?;
        write_artifact(emit_json, &pretty_json(&full))?;
    }
    Ok(if out.bisimilar { Outcome::Success } else { Outcome::Negative })
}

fn reach_report(
    loaded: &Loaded,
    precision: &Precision,
    explore: &ExploreArgs,
    direct: bool,
    safe: Option<&BTreeMap<String, Interval>>,
    emit_csv: Option<&Path>,
) -> Result<(Value, ReachBox)> {
    let (h, tmap) = resolve(loaded, precision)?;
    let mut opts = explore_options(explore, h, loaded);
    if let (Some(safe), None) = (safe, &opts.observe) {
        opts.observe = Some(safe.keys().cloned().collect());
    }
    let started = Instant::now();
    let (system, tmap) = if direct {
        (loaded.system.clone(), tmap)
    } else {
        (discretize(&loaded.system, h, precision.eps, &tmap)?, EquilibriumTimes::new())
    };
    opts.tmap = tmap;
    let ex = build_ts(&system, &loaded.init, &opts)?;
    let vars = ex.bounded.obs_vars.clone();
    let reach = reachable(&ex.bounded, &vars)?;
    log::info!("explored {} states in {:?}", ex.bounded.len(), started.elapsed());
    if emit_csv.is_some() {
        write_artifact(emit_csv, &samples_csv(&ex.bounded, &vars)?)?;
    }
    let mut report = json!({
        "h": h,
        "eps": precision.eps,
        "system": if direct { "direct" } else { "discretized" },
        "states": ex.bounded.len(),
        "transitions": ex.bounded.edge_count(),
        "reach": reach,
    });
    if !direct {
        report["widened"] = serde_json::to_value(widen(&reach, precision.eps))?;
    }
    Ok((report, reach))
}
