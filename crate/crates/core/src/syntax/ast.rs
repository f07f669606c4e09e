//! Abstract syntax of HCSP processes.

use serde::{Deserialize, Serialize};

/// Arithmetic binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Arithmetic expression over process variables.
///
/// Named constants from a model header are kept by name so that printing
/// reproduces the source text, but they carry their value and do not count as
/// process variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Var(String),
    Const { name: String, value: f64 },
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Mul, a, b)
    }

    pub fn collect_vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Expr::Num(_) | Expr::Const { .. } => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) | Expr::Sqrt(e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Replaces every occurrence of the named variables.
    pub fn substitute(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Expr::Num(_) | Expr::Const { .. } => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(f))),
            Expr::Sqrt(e) => Expr::Sqrt(Box::new(e.substitute(f))),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.substitute(f), b.substitute(f)),
        }
    }
}

/// Comparison operators of atomic boolean formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoolExpr {
    True,
    False,
    Cmp(CmpOp, Expr, Expr),
    /// A readiness variable (`ch?` or `ch!`) read as a boolean: true iff nonzero.
    Flag(String),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

#[allow(clippy::should_implement_trait)]
impl BoolExpr {
    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> BoolExpr {
        BoolExpr::Cmp(op, a, b)
    }

    pub fn not(b: BoolExpr) -> BoolExpr {
        BoolExpr::Not(Box::new(b))
    }

    pub fn and(a: BoolExpr, b: BoolExpr) -> BoolExpr {
        BoolExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: BoolExpr, b: BoolExpr) -> BoolExpr {
        BoolExpr::Or(Box::new(a), Box::new(b))
    }

    /// Left-nested conjunction; `True` for an empty list.
    pub fn all(items: impl IntoIterator<Item = BoolExpr>) -> BoolExpr {
        items.into_iter().reduce(BoolExpr::and).unwrap_or(BoolExpr::True)
    }

    /// Left-nested disjunction; `False` for an empty list.
    pub fn any(items: impl IntoIterator<Item = BoolExpr>) -> BoolExpr {
        items.into_iter().reduce(BoolExpr::or).unwrap_or(BoolExpr::False)
    }

    pub fn collect_vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Cmp(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            BoolExpr::Flag(f) => {
                out.insert(f.clone());
            }
            BoolExpr::Not(b) => b.collect_vars(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Folds the constants `True`/`False` out of conjunctions, disjunctions and
    /// negations. Atoms are left untouched.
    pub fn simplify(&self) -> BoolExpr {
        match self {
            BoolExpr::Not(b) => match b.simplify() {
                BoolExpr::True => BoolExpr::False,
                BoolExpr::False => BoolExpr::True,
                other => BoolExpr::not(other),
            },
            BoolExpr::And(a, b) => match (a.simplify(), b.simplify()) {
                (BoolExpr::False, _) | (_, BoolExpr::False) => BoolExpr::False,
                (BoolExpr::True, x) | (x, BoolExpr::True) => x,
                (x, y) => BoolExpr::and(x, y),
            },
            BoolExpr::Or(a, b) => match (a.simplify(), b.simplify()) {
                (BoolExpr::True, _) | (_, BoolExpr::True) => BoolExpr::True,
                (BoolExpr::False, x) | (x, BoolExpr::False) => x,
                (x, y) => BoolExpr::or(x, y),
            },
            other => other.clone(),
        }
    }
}

/// Direction of a communication end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dir {
    #[serde(rename = "?")]
    Input,
    #[serde(rename = "!")]
    Output,
}

impl Dir {
    pub fn symbol(self) -> char {
        match self {
            Dir::Input => '?',
            Dir::Output => '!',
        }
    }

    pub fn dual(self) -> Dir {
        match self {
            Dir::Input => Dir::Output,
            Dir::Output => Dir::Input,
        }
    }
}

/// Name of the readiness variable for one end of a channel, e.g. `wl?`.
pub fn readiness_var(chan: &str, dir: Dir) -> String {
    format!("{chan}{}", dir.symbol())
}

/// True for readiness variable names (`ch?` / `ch!`).
pub fn is_readiness_var(name: &str) -> bool {
    name.ends_with('?') || name.ends_with('!')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CommEvent {
    Input { chan: String, var: String },
    Output { chan: String, expr: Expr },
}

impl CommEvent {
    pub fn chan(&self) -> &str {
        match self {
            CommEvent::Input { chan, .. } | CommEvent::Output { chan, .. } => chan,
        }
    }

    pub fn dir(&self) -> Dir {
        match self {
            CommEvent::Input { .. } => Dir::Input,
            CommEvent::Output { .. } => Dir::Output,
        }
    }

    pub fn as_process(&self) -> ProcessTerm {
        match self {
            CommEvent::Input { chan, var } => ProcessTerm::Input(chan.clone(), var.clone()),
            CommEvent::Output { chan, expr } => ProcessTerm::Output(chan.clone(), expr.clone()),
        }
    }
}

/// Stability certificate of an ODE: its equilibrium and optional constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCert {
    /// Equilibrium point, one closed expression per equation of the ODE.
    pub equilibrium: Vec<Expr>,
    /// Equilibrium time in seconds.
    pub equilibrium_time: Option<f64>,
    pub lipschitz: Option<f64>,
    pub second_deriv_bound: Option<f64>,
    pub slope_bound: Option<f64>,
}

/// A system of ordinary differential equations `x_dot = f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSpec {
    pub name: Option<String>,
    pub equations: Vec<(String, Expr)>,
    pub cert: Option<StabilityCert>,
}

impl OdeSpec {
    pub fn new(equations: Vec<(String, Expr)>) -> OdeSpec {
        OdeSpec { name: None, equations, cert: None }
    }

    pub fn vars(&self) -> Vec<String> {
        self.equations.iter().map(|(v, _)| v.clone()).collect()
    }
}

/// Upper bound of a repetition, optionally tied to a named header bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatBound {
    pub count: u32,
    pub name: Option<String>,
}

impl RepeatBound {
    pub fn literal(count: u32) -> RepeatBound {
        RepeatBound { count, name: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProcessTerm {
    Skip,
    /// Delays forever.
    Stop,
    Assign(String, Expr),
    /// Simultaneous assignment `(x, y) := (e1, e2)`.
    VecAssign(Vec<(String, Expr)>),
    Wait(Expr),
    Input(String, String),
    Output(String, Expr),
    Seq(Box<ProcessTerm>, Box<ProcessTerm>),
    Guard(BoolExpr, Box<ProcessTerm>),
    IntChoice(Box<ProcessTerm>, Box<ProcessTerm>),
    Repeat(Box<ProcessTerm>, RepeatBound),
    ExtChoice(Vec<(CommEvent, ProcessTerm)>),
    Ode(OdeSpec, BoolExpr),
    OdeInterrupt(OdeSpec, BoolExpr, Vec<(CommEvent, ProcessTerm)>),
    Parallel(Box<ProcessTerm>, Box<ProcessTerm>),
}

impl ProcessTerm {
    pub fn seq(a: ProcessTerm, b: ProcessTerm) -> ProcessTerm {
        ProcessTerm::Seq(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence of the given steps; `Skip` when empty.
    pub fn seq_all(items: impl IntoIterator<Item = ProcessTerm>) -> ProcessTerm {
        let items: Vec<_> = items.into_iter().collect();
        let mut iter = items.into_iter().rev();
        match iter.next() {
            None => ProcessTerm::Skip,
            Some(last) => iter.fold(last, |acc, p| ProcessTerm::seq(p, acc)),
        }
    }

    pub fn guard(b: BoolExpr, p: ProcessTerm) -> ProcessTerm {
        ProcessTerm::Guard(b, Box::new(p))
    }

    pub fn int_choice(a: ProcessTerm, b: ProcessTerm) -> ProcessTerm {
        ProcessTerm::IntChoice(Box::new(a), Box::new(b))
    }

    pub fn repeat(p: ProcessTerm, count: u32) -> ProcessTerm {
        ProcessTerm::Repeat(Box::new(p), RepeatBound::literal(count))
    }

    pub fn parallel(a: ProcessTerm, b: ProcessTerm) -> ProcessTerm {
        ProcessTerm::Parallel(Box::new(a), Box::new(b))
    }

    pub fn assign(var: impl Into<String>, e: Expr) -> ProcessTerm {
        ProcessTerm::Assign(var.into(), e)
    }

    /// Calls `f` on every ODE spec in pre-order.
    pub fn for_each_ode<'a>(&'a self, f: &mut dyn FnMut(&'a OdeSpec, &'a BoolExpr)) {
        match self {
            ProcessTerm::Ode(spec, b) => f(spec, b),
            ProcessTerm::OdeInterrupt(spec, b, branches) => {
                f(spec, b);
                for (_, p) in branches {
                    p.for_each_ode(f);
                }
            }
            ProcessTerm::Seq(a, b) | ProcessTerm::IntChoice(a, b) | ProcessTerm::Parallel(a, b) => {
                a.for_each_ode(f);
                b.for_each_ode(f);
            }
            ProcessTerm::Guard(_, p) | ProcessTerm::Repeat(p, _) => p.for_each_ode(f),
            ProcessTerm::ExtChoice(branches) => {
                for (_, p) in branches {
                    p.for_each_ode(f);
                }
            }
            _ => {}
        }
    }

    /// Mutable pre-order traversal over ODE specs, in the same order as
    /// [`ProcessTerm::for_each_ode`].
    pub fn for_each_ode_mut(&mut self, f: &mut dyn FnMut(&mut OdeSpec)) {
        match self {
            ProcessTerm::Ode(spec, _) => f(spec),
            ProcessTerm::OdeInterrupt(spec, _, branches) => {
                f(spec);
                for (_, p) in branches {
                    p.for_each_ode_mut(f);
                }
            }
            ProcessTerm::Seq(a, b) | ProcessTerm::IntChoice(a, b) | ProcessTerm::Parallel(a, b) => {
                a.for_each_ode_mut(f);
                b.for_each_ode_mut(f);
            }
            ProcessTerm::Guard(_, p) | ProcessTerm::Repeat(p, _) => p.for_each_ode_mut(f),
            ProcessTerm::ExtChoice(branches) => {
                for (_, p) in branches {
                    p.for_each_ode_mut(f);
                }
            }
            _ => {}
        }
    }

    /// Gives every unnamed ODE the name `ode<k>`, numbering in pre-order from 1.
    /// Names already present are kept.
    pub fn name_odes(&mut self) {
        let mut k = 0;
        self.for_each_ode_mut(&mut |spec| {
            k += 1;
            if spec.name.is_none() {
                spec.name = Some(format!("ode{k}"));
            }
        });
    }

    /// True if the term contains an `Ode` or `OdeInterrupt` node.
    pub fn has_ode(&self) -> bool {
        let mut found = false;
        self.for_each_ode(&mut |_, _| found = true);
        found
    }

    /// Top-level parallel components, left to right.
    pub fn parallel_components(&self) -> Vec<&ProcessTerm> {
        match self {
            ProcessTerm::Parallel(a, b) => {
                let mut out = a.parallel_components();
                out.extend(b.parallel_components());
                out
            }
            other => vec![other],
        }
    }
}
