//! Euler discretization of HCSP into ODE-free HCSP, neighborhoods of
//! predicates, and the robust-safety monitor.

mod robust;
mod rules;

use thiserror::Error;

use crate::syntax::{BinOp, BoolExpr, CmpOp, Expr};

pub use robust::{check_robust_safety, robustness, MonitorBudget, RobustSafetyReport, Verdict, Witness};
pub use rules::{discretize, readiness_env, ReadinessEnv};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizeError {
    #[error("equality atom `{0}` has no open neighborhood")]
    EqualityAtom(String),
    #[error("ODE `{0}` has no equilibrium point in its certificate")]
    MissingCertificate(String),
    #[error("no equilibrium time for ODE `{0}`")]
    MissingEquilibriumTime(String),
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("readiness variable `{0}` is written by more than one parallel component")]
    SharedReadinessWriter(String),
    #[error("{0}")]
    Semantics(#[from] crate::semantics::SemError),
    #[error("{0}")]
    Numerics(String),
}

/// Negation normal form: negations pushed onto comparisons and flags.
pub(crate) fn nnf(b: &BoolExpr, negate: bool) -> BoolExpr {
    match b {
        BoolExpr::True => {
            if negate {
                BoolExpr::False
            } else {
                BoolExpr::True
            }
        }
        BoolExpr::False => {
            if negate {
                BoolExpr::True
            } else {
                BoolExpr::False
            }
        }
        BoolExpr::Cmp(op, l, r) => BoolExpr::Cmp(if negate { op.negate() } else { *op }, l.clone(), r.clone()),
        BoolExpr::Flag(_) => {
            if negate {
                BoolExpr::not(b.clone())
            } else {
                b.clone()
            }
        }
        BoolExpr::Not(a) => nnf(a, !negate),
        BoolExpr::And(a, c) if !negate => BoolExpr::and(nnf(a, false), nnf(c, false)),
        BoolExpr::And(a, c) => BoolExpr::or(nnf(a, true), nnf(c, true)),
        BoolExpr::Or(a, c) if !negate => BoolExpr::or(nnf(a, false), nnf(c, false)),
        BoolExpr::Or(a, c) => BoolExpr::and(nnf(a, true), nnf(c, true)),
    }
}

/// `e + delta`, folding literals and cancelling a previous opposite shift.
fn shift(e: &Expr, delta: f64) -> Expr {
    match e {
        Expr::Num(c) => Expr::Num(c + delta),
        Expr::Bin(BinOp::Sub, a, b) if matches!(**b, Expr::Num(v) if v == delta) => (**a).clone(),
        Expr::Bin(BinOp::Add, a, b) if matches!(**b, Expr::Num(v) if v == -delta) => (**a).clone(),
        _ if delta >= 0.0 => Expr::add(e.clone(), Expr::Num(delta)),
        _ => Expr::sub(e.clone(), Expr::Num(-delta)),
    }
}

/// Moves every atom's threshold by `eps` in the direction that enlarges
/// its truth set (`eps > 0`) or shrinks it (`eps < 0`).
fn offset(b: &BoolExpr, eps: f64) -> Result<BoolExpr, DiscretizeError> {
    Ok(match b {
        BoolExpr::Cmp(op, l, r) => match op {
            CmpOp::Lt | CmpOp::Le => BoolExpr::Cmp(*op, l.clone(), shift(r, eps)),
            CmpOp::Gt | CmpOp::Ge => BoolExpr::Cmp(*op, l.clone(), shift(r, -eps)),
            CmpOp::Eq | CmpOp::Ne => return Err(DiscretizeError::EqualityAtom(b.to_string())),
        },
        BoolExpr::And(a, c) => BoolExpr::and(offset(a, eps)?, offset(c, eps)?),
        BoolExpr::Or(a, c) => BoolExpr::or(offset(a, eps)?, offset(c, eps)?),
        other => other.clone(),
    })
}

/// `N(B, ε)`: a predicate holding on the ε-neighbourhood of `B`. Each atom
/// `e ⊲ c` is shifted outward by ε on its right-hand side.
pub fn neighborhood(b: &BoolExpr, eps: f64) -> Result<BoolExpr, DiscretizeError> {
    if eps == 0.0 {
        return Ok(b.clone());
    }
    offset(&nnf(b, false), eps)
}

/// `N(B, -ε)`: the points of `B` farther than ε from its boundary, by the
/// inward shift of every atom.
pub fn shrink(b: &BoolExpr, eps: f64) -> Result<BoolExpr, DiscretizeError> {
    if eps == 0.0 {
        return Ok(b.clone());
    }
    offset(&nnf(b, false), -eps)
}
