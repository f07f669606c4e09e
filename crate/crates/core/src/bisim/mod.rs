//! Bounded transition systems and the (h, ε)-approximate bisimulation
//! decision: build both systems, start from all observation-close pairs and
//! refine to the greatest fixpoint.

mod build;
mod relation;

use serde::Serialize;
use thiserror::Error;

use crate::numerics::NumericsError;
use crate::semantics::{Adjacency, Label, SemError};

pub use build::{build_ts, clock_var, estimate_tmap, BuildOptions, Exploration};
pub use relation::{
    initial_relation, is_bisimulation, max_bisim, obs_distance, refine, BisimRelation, Violation, WeakMoves,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BisimError {
    #[error(transparent)]
    Semantics(#[from] SemError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("no equilibrium time for ODE `{0}`")]
    MissingEquilibriumTime(String),
    #[error("observation dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("observed variable `{0}` is not a variable of the process")]
    UnknownObservation(String),
    #[error("ODE `{ode}`: {message}")]
    Equilibrium { ode: String, message: String },
}

/// Distance between labels: 0 for two communications or two τ, `|d - d'|`
/// for two delays, infinity otherwise.
pub fn label_distance(l1: &Label, l2: &Label) -> f64 {
    match (l1, l2) {
        (Label::Tau, Label::Tau) | (Label::Comm { .. }, Label::Comm { .. }) => 0.0,
        (Label::Delay { d: a }, Label::Delay { d: b }) => (a - b).abs(),
        _ => f64::INFINITY,
    }
}

/// A finite transition system with observations, detached from the program
/// that generated it.
#[derive(Debug, Clone)]
pub struct BoundedTS {
    /// Names of the observed variables, in observation order.
    pub obs_vars: Vec<String>,
    pub observations: Vec<Vec<f64>>,
    pub adj: Adjacency,
    pub initial: usize,
    /// States whose outgoing transitions were cut by the equilibrium-time
    /// bound; the move-matching clauses are not checked for them.
    pub truncated: Vec<bool>,
}

impl BoundedTS {
    /// A system with no truncated states.
    pub fn new(obs_vars: Vec<String>, observations: Vec<Vec<f64>>, adj: Adjacency, initial: usize) -> BoundedTS {
        let truncated = vec![false; observations.len()];
        BoundedTS { obs_vars, observations, adj, initial, truncated }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    /// Indices of the states reachable from the initial state, sorted.
    pub fn reachable(&self) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        let mut out = Vec::new();
        while let Some(s) = stack.pop() {
            out.push(s);
            for (_, d) in &self.adj[s] {
                if !seen[*d] {
                    seen[*d] = true;
                    stack.push(*d);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Size figures reported with a verdict.
#[derive(Debug, Clone, Serialize)]
pub struct BisimStats {
    pub states1: usize,
    pub transitions1: usize,
    pub states2: usize,
    pub transitions2: usize,
    pub initial_pairs: usize,
    pub relation_pairs: usize,
    /// Pair re-checks performed by the fixpoint.
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct BisimOutcome {
    pub bisimilar: bool,
    pub relation: BisimRelation,
    pub stats: BisimStats,
    pub first: Exploration,
    pub second: Exploration,
}

/// Decides whether `(p1, v0)` and `(p2, v0)` are (h, ε)-approximately
/// bisimilar. Both processes are explored with `opts`; the observed
/// variables default to the non-readiness variables the two share.
pub fn approx_bisimilar(
    p1: &crate::syntax::ProcessTerm,
    p2: &crate::syntax::ProcessTerm,
    v0: &crate::Valuation,
    h: f64,
    eps: f64,
    opts: &BuildOptions,
) -> Result<BisimOutcome, BisimError> {
    let observe = match &opts.observe {
        Some(v) => v.clone(),
        None => {
            let a = build::default_observables(p1);
            let b = build::default_observables(p2);
            a.intersection(&b).cloned().collect()
        }
    };
    let opts = BuildOptions { observe: Some(observe), ..opts.clone() };
    let first = build_ts(p1, v0, &opts)?;
    let second = build_ts(p2, v0, &opts)?;
    let (t1, t2) = (&first.bounded, &second.bounded);
    let relation = max_bisim(t1, t2, h, eps)?;
    let bisimilar = relation.contains(t1.initial, t2.initial);
    let stats = BisimStats {
        states1: t1.len(),
        transitions1: t1.edge_count(),
        states2: t2.len(),
        transitions2: t2.edge_count(),
        initial_pairs: relation.initial_pairs,
        relation_pairs: relation.pairs.len(),
        iterations: relation.iterations,
    };
    Ok(BisimOutcome { bisimilar, relation, stats, first, second })
}
