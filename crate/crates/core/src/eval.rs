//! Expression evaluation over indexed variable slots.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::syntax::{BinOp, BoolExpr, CmpOp, Expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    SqrtOfNegative(f64),
    #[error("non-finite value")]
    NonFinite,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
}

/// An arithmetic expression with variables resolved to slot indices.
#[derive(Debug, Clone, PartialEq)]
pub enum CExpr {
    Num(f64),
    Var(usize),
    Neg(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    Sqrt(Box<CExpr>),
}

impl CExpr {
    pub fn compile(e: &Expr, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<CExpr, EvalError> {
        Ok(match e {
            Expr::Num(v) => CExpr::Num(*v),
            Expr::Const { value, .. } => CExpr::Num(*value),
            Expr::Var(name) => CExpr::Var(resolve(name).ok_or_else(|| EvalError::UnknownVariable(name.clone()))?),
            Expr::Neg(a) => CExpr::Neg(Box::new(CExpr::compile(a, resolve)?)),
            Expr::Sqrt(a) => CExpr::Sqrt(Box::new(CExpr::compile(a, resolve)?)),
            Expr::Bin(op, a, b) => {
                CExpr::Bin(*op, Box::new(CExpr::compile(a, resolve)?), Box::new(CExpr::compile(b, resolve)?))
            }
        })
    }

    pub fn eval(&self, vals: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            CExpr::Num(v) => *v,
            CExpr::Var(i) => vals[*i],
            CExpr::Neg(a) => -a.eval(vals)?,
            CExpr::Sqrt(a) => {
                let x = a.eval(vals)?;
                if x < 0.0 {
                    return Err(EvalError::SqrtOfNegative(x));
                }
                x.sqrt()
            }
            CExpr::Bin(op, a, b) => {
                let (x, y) = (a.eval(vals)?, b.eval(vals)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        x / y
                    }
                    BinOp::Pow => x.powf(y),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CBool {
    Const(bool),
    Cmp(CmpOp, CExpr, CExpr),
    Flag(usize),
    Not(Box<CBool>),
    And(Box<CBool>, Box<CBool>),
    Or(Box<CBool>, Box<CBool>),
}

impl CBool {
    pub fn compile(b: &BoolExpr, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<CBool, EvalError> {
        Ok(match b {
            BoolExpr::True => CBool::Const(true),
            BoolExpr::False => CBool::Const(false),
            BoolExpr::Cmp(op, l, r) => CBool::Cmp(*op, CExpr::compile(l, resolve)?, CExpr::compile(r, resolve)?),
            BoolExpr::Flag(name) => CBool::Flag(resolve(name).ok_or_else(|| EvalError::UnknownVariable(name.clone()))?),
            BoolExpr::Not(a) => CBool::Not(Box::new(CBool::compile(a, resolve)?)),
            BoolExpr::And(a, c) => {
                CBool::And(Box::new(CBool::compile(a, resolve)?), Box::new(CBool::compile(c, resolve)?))
            }
            BoolExpr::Or(a, c) => {
                CBool::Or(Box::new(CBool::compile(a, resolve)?), Box::new(CBool::compile(c, resolve)?))
            }
        })
    }

    pub fn eval(&self, vals: &[f64]) -> Result<bool, EvalError> {
        Ok(match self {
            CBool::Const(b) => *b,
            CBool::Cmp(op, l, r) => op.holds(l.eval(vals)?, r.eval(vals)?),
            CBool::Flag(i) => vals[*i] != 0.0,
            CBool::Not(a) => !a.eval(vals)?,
            CBool::And(a, c) => a.eval(vals)? && c.eval(vals)?,
            CBool::Or(a, c) => a.eval(vals)? || c.eval(vals)?,
        })
    }

    pub fn is_const_true(&self) -> bool {
        matches!(self, CBool::Const(true))
    }
}

/// Evaluates an expression whose variables are looked up in `env`.
pub fn eval_in(e: &Expr, env: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
    let names: Vec<&String> = env.keys().collect();
    let vals: Vec<f64> = env.values().copied().collect();
    let c = CExpr::compile(e, &|n| names.iter().position(|k| k.as_str() == n))?;
    c.eval(&vals)
}

/// Evaluates a boolean expression whose variables are looked up in `env`.
pub fn eval_bool_in(b: &BoolExpr, env: &BTreeMap<String, f64>) -> Result<bool, EvalError> {
    let names: Vec<&String> = env.keys().collect();
    let vals: Vec<f64> = env.values().copied().collect();
    let c = CBool::compile(b, &|n| names.iter().position(|k| k.as_str() == n))?;
    c.eval(&vals)
}
