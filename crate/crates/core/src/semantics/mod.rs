//! Executable small-step semantics of HCSP: a compiled program, process
//! states, enabled transitions, τ-compression and weak steps.

mod explore;
mod program;
mod step;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::EvalError;
use crate::syntax::{format_num, Dir};

pub use explore::{
    explore, tau_endpoints, weak_step, weak_targets, Adjacency, Edge, ExploreOptions, TauCycle, TransitionSystem,
    DEFAULT_STATE_CAP,
};
pub use program::Program;
pub use step::{Config, Frame, State, Vals};

/// Delays shorter than this are treated as zero, and waits closer than this
/// to their end are finished.
pub const TIME_EPS: f64 = 1e-9;

/// How far ahead an evolution looks to decide that it sits on the boundary
/// of its domain.
pub const BOUNDARY_LOOKAHEAD: f64 = 1e-7;

/// A transition label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Label {
    Delay { d: f64 },
    Comm { chan: String, dir: Dir, value: f64 },
    Tau,
}

impl Label {
    pub fn delay(d: f64) -> Label {
        Label::Delay { d }
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, Label::Tau)
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Delay { d } => write!(f, "delay {}", format_num(*d)),
            Label::Comm { chan, dir, value } => write!(f, "{chan}{}{}", dir.symbol(), format_num(*value)),
            Label::Tau => f.write_str("tau"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemError {
    #[error("cannot compile process: {0}")]
    Compile(String),
    #[error("{error} in state {state}")]
    Eval { error: EvalError, state: String },
    #[error("divergent tau loop through {} states: {}", .cycle.len(), .cycle.join(" -> "))]
    Divergence { cycle: Vec<String> },
    #[error("exploration exceeded the state cap of {cap} states")]
    StateCap { cap: usize },
}
