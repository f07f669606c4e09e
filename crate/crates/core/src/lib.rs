//! Hybrid CSP (HCSP) models: parsing, executable transition semantics,
//! (h, ε)-approximate bisimulation, Euler discretization into ODE-free
//! processes, and reachability/safety analysis.

use std::collections::BTreeMap;

pub mod bisim;
pub mod discretize;
pub mod eval;
pub mod models;
pub mod numerics;
pub mod reach;
pub mod semantics;
pub mod syntax;

#[cfg(feature = "testkit")]
pub mod testkit;

/// A process state: variable name to value.
pub type Valuation = BTreeMap<String, f64>;

/// Equilibrium time per ODE name, in seconds.
pub type EquilibriumTimes = BTreeMap<String, f64>;
