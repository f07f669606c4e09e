use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use hcsp::syntax::{looks_like_model, parse, parse_model, Model, ProcessTerm};
use hcsp::{EquilibriumTimes, Valuation};

use crate::ModelArgs;

/// A loaded system with its initial valuation.
pub struct Loaded {
    /// The parsed model, when the input was a model file.
    pub model: Option<Model>,
    pub system: ProcessTerm,
    pub init: Valuation,
    pub menu: BTreeMap<String, Vec<f64>>,
}

fn read_source(name: &str) -> Result<String> {
    if name == "@watertank" {
        return Ok(hcsp::models::WATERTANK.to_string());
    }
    std::fs::read_to_string(name).with_context(|| format!("reading {name}"))
}

fn split_pair(s: &str) -> Result<(&str, &str)> {
    s.split_once('=').map(|(k, v)| (k.trim(), v.trim())).ok_or_else(|| anyhow!("expected `name=value`, got `{s}`"))
}

fn number(s: &str) -> Result<f64> {
    s.parse::<f64>().with_context(|| format!("`{s}` is not a number"))
}

/// `name=value` pairs into a map.
pub fn assignments(items: &[String]) -> Result<BTreeMap<String, f64>> {
    items.iter().map(|s| split_pair(s).and_then(|(k, v)| Ok((k.to_string(), number(v)?)))).collect()
}

/// `name=lo:hi` pairs into intervals.
pub fn intervals(items: &[String]) -> Result<BTreeMap<String, hcsp::reach::Interval>> {
    let mut out = BTreeMap::new();
    for s in items {
        let (k, v) = split_pair(s)?;
        let (lo, hi) = v.split_once(':').ok_or_else(|| anyhow!("expected `name=lo:hi`, got `{s}`"))?;
        let (lo, hi) = (number(lo)?, number(hi)?);
        if lo > hi {
            bail!("empty interval for `{k}`: {lo} > {hi}");
        }
        out.insert(k.to_string(), hcsp::reach::Interval::new(lo, hi));
    }
    Ok(out)
}

pub fn equilibrium_times(items: &[String]) -> Result<EquilibriumTimes> {
    assignments(items)
}

pub fn load(args: &ModelArgs) -> Result<Loaded> {
    let text = read_source(&args.model)?;
    let (model, system, mut init) = if looks_like_model(&text) {
        let mut m = parse_model(&text).map_err(|e| anyhow!("{}: {e}", args.model))?;
        for w in &m.warnings {
            log::warn!("{w}");
        }
        if let Some(n) = args.horizon {
            if !m.bounds.contains_key("horizon") {
                bail!("model has no `horizon` bound");
            }
            m.set_bound("horizon", n);
            if m.bounds.contains_key("periods") {
                m.set_bound("periods", n.saturating_mul(2));
            }
        }
        let system = m.system.clone();
        let init = m.init.clone();
        (Some(m), system, init)
    } else {
        if args.horizon.is_some() {
            bail!("--horizon needs a model file with a `horizon` bound");
        }
        let p = parse(&text).map_err(|e| anyhow!("{}: {e}", args.model))?;
        (None, p, Valuation::new())
    };
    init.extend(assignments(&args.init)?);
    let mut menu = BTreeMap::new();
    for s in &args.menu {
        let (k, v) = split_pair(s)?;
        let values = v.split(':').map(number).collect::<Result<Vec<_>>>()?;
        menu.insert(k.to_string(), values);
    }
    Ok(Loaded { model, system, init, menu })
}
