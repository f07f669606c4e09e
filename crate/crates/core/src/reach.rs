//! Reachable sets of bounded transition systems as interval boxes,
//! ε-widening, and one-sided safety verdicts.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::bisim::BoundedTS;
use crate::semantics::Label;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReachError {
    #[error("variable `{0}` is not observed by the transition system")]
    UnknownVariable(String),
    #[error("safe box has no interval for `{0}`")]
    MissingSafeInterval(String),
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Interval {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn includes(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    fn hull(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.lo, self.hi].serialize(s)
    }
}

/// Per-variable interval hull of the observations of reachable states.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ReachBox(pub BTreeMap<String, Interval>);

impl ReachBox {
    pub fn get(&self, var: &str) -> Option<Interval> {
        self.0.get(var).copied()
    }

    /// True if every interval of `other` lies inside the matching interval
    /// of `self`; variables absent from `self` are unconstrained.
    pub fn includes(&self, other: &ReachBox) -> bool {
        other.0.iter().all(|(v, i)| self.0.get(v).is_none_or(|mine| mine.includes(i)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("box serializes")
    }
}

/// States reachable from the initial state of `t`, in index order.
fn reachable_states(t: &BoundedTS) -> Vec<usize> {
    t.reachable()
}

fn columns(t: &BoundedTS, vars: &[String]) -> Result<Vec<usize>, ReachError> {
    vars.iter()
        .map(|v| t.obs_vars.iter().position(|o| o == v).ok_or_else(|| ReachError::UnknownVariable(v.clone())))
        .collect()
}

/// Componentwise min/max of the observations of every state reachable from
/// the initial state, restricted to `vars`.
pub fn reachable(t: &BoundedTS, vars: &[String]) -> Result<ReachBox, ReachError> {
    let cols = columns(t, vars)?;
    let init = &t.observations[t.initial];
    let mut out: BTreeMap<String, Interval> =
        vars.iter().zip(&cols).map(|(v, &c)| (v.clone(), Interval::point(init[c]))).collect();
    for s in reachable_states(t) {
        for (v, &c) in vars.iter().zip(&cols) {
            out.get_mut(v).expect("initialized").hull(t.observations[s][c]);
        }
    }
    Ok(ReachBox(out))
}

/// Every interval `[lo, hi]` becomes `[lo - eps, hi + eps]`.
pub fn widen(r: &ReachBox, eps: f64) -> ReachBox {
    ReachBox(r.0.iter().map(|(v, i)| (v.clone(), Interval::new(i.lo - eps, i.hi + eps))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SafetyVerdict {
    Safe,
    /// The widened set leaves the safe box; nothing is concluded.
    NotProven,
}

impl std::fmt::Display for SafetyVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SafetyVerdict::Safe => "safe",
            SafetyVerdict::NotProven => "not-proven",
        })
    }
}

/// `Safe` iff `widen(r, eps)` lies inside `safe` on every variable of `r`.
pub fn safety(r: &ReachBox, safe: &BTreeMap<String, Interval>, eps: f64) -> Result<SafetyVerdict, ReachError> {
    let widened = widen(r, eps);
    for (v, i) in &widened.0 {
        let bound = safe.get(v).ok_or_else(|| ReachError::MissingSafeInterval(v.clone()))?;
        if !bound.includes(i) {
            return Ok(SafetyVerdict::NotProven);
        }
    }
    Ok(SafetyVerdict::Safe)
}

#[derive(PartialEq)]
struct Timed(f64, usize);

impl Eq for Timed {}

impl PartialOrd for Timed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timed {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Earliest arrival time of every state (sum of delay labels along the
/// fastest path); unreachable states get `None`.
pub fn arrival_times(t: &BoundedTS) -> Vec<Option<f64>> {
    let mut best: Vec<Option<f64>> = vec![None; t.len()];
    let mut heap = BinaryHeap::from([Timed(0.0, t.initial)]);
    best[t.initial] = Some(0.0);
    while let Some(Timed(time, s)) = heap.pop() {
        if best[s].is_some_and(|b| b < time) {
            continue;
        }
        for (l, d) in &t.adj[s] {
            let next = time + if let Label::Delay { d } = l { *d } else { 0.0 };
            if best[*d].is_none_or(|b| next < b) {
                best[*d] = Some(next);
                heap.push(Timed(next, *d));
            }
        }
    }
    best
}

/// CSV rows `time,variable,value` for every reachable state, ordered by
/// time, then state, then variable.
pub fn samples_csv(t: &BoundedTS, vars: &[String]) -> Result<String, ReachError> {
    let cols = columns(t, vars)?;
    let times = arrival_times(t);
    let mut rows: Vec<(f64, usize)> = times.iter().enumerate().filter_map(|(s, tm)| tm.map(|tm| (tm, s))).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = String::from("time,variable,value\n");
    for (tm, s) in rows {
        for (v, &c) in vars.iter().zip(&cols) {
            out.push_str(&format!("{tm},{v},{}\n", t.observations[s][c]));
        }
    }
    Ok(out)
}
