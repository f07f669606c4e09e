use std::collections::BTreeSet;

use crate::eval::{CBool, CExpr};
use crate::syntax::{channels, is_readiness_var, vars, CommEvent, ProcessTerm};
use crate::Valuation;

use super::step::{Config, State, Vals};
use super::SemError;

pub(crate) type NodeId = usize;

#[derive(Debug, Clone)]
pub(crate) enum CEvent {
    Recv { chan: usize, var: usize },
    Send { chan: usize, expr: CExpr },
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledOde {
    pub vars: Vec<usize>,
    pub rhs: Vec<CExpr>,
    pub domain: CBool,
}

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Skip,
    Stop,
    /// Simultaneous assignment; `urgent` when every target is a readiness
    /// variable.
    Assign {
        targets: Vec<(usize, CExpr)>,
        urgent: bool,
    },
    Wait(CExpr),
    Comm(CEvent),
    Seq(NodeId, NodeId),
    Guard(CBool, NodeId),
    IntChoice(NodeId, NodeId),
    Repeat(NodeId, u32),
    ExtChoice(Vec<(CEvent, NodeId)>),
    Ode {
        ode: usize,
        branches: Vec<(CEvent, NodeId)>,
    },
    Par {
        left: NodeId,
        right: NodeId,
        shared: BTreeSet<usize>,
    },
}

/// A process term compiled to an arena of nodes with variables resolved to
/// slots. States of the program refer to nodes by index.
#[derive(Debug, Clone)]
pub struct Program {
    pub(crate) nodes: Vec<Node>,
    pub(crate) terms: Vec<ProcessTerm>,
    pub(crate) odes: Vec<CompiledOde>,
    pub(crate) root: NodeId,
    vars: Vec<String>,
    chans: Vec<String>,
}

impl Program {
    /// Compiles `p`. The slot table holds every variable of `p` plus
    /// `extra_vars`, in sorted order. Parallel composition is only allowed
    /// at the top of the term.
    pub fn compile(p: &ProcessTerm, extra_vars: &[String]) -> Result<Program, SemError> {
        let mut var_set = vars(p);
        var_set.extend(extra_vars.iter().cloned());
        let mut prog = Program {
            nodes: Vec::new(),
            terms: Vec::new(),
            odes: Vec::new(),
            root: 0,
            vars: var_set.into_iter().collect(),
            chans: channels(p).into_iter().collect(),
        };
        prog.root = prog.add(p, true)?;
        Ok(prog)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn channels(&self) -> &[String] {
        &self.chans
    }

    pub fn slot(&self, var: &str) -> Option<usize> {
        self.vars.binary_search_by(|v| v.as_str().cmp(var)).ok()
    }

    pub(crate) fn chan_name(&self, c: usize) -> &str {
        &self.chans[c]
    }

    fn chan_id(&self, c: &str) -> usize {
        self.chans.binary_search_by(|v| v.as_str().cmp(c)).expect("channel collected at compile time")
    }

    fn expr(&self, e: &crate::syntax::Expr) -> Result<CExpr, SemError> {
        CExpr::compile(e, &|n| self.slot(n)).map_err(|e| SemError::Compile(e.to_string()))
    }

    fn cond(&self, b: &crate::syntax::BoolExpr) -> Result<CBool, SemError> {
        CBool::compile(b, &|n| self.slot(n)).map_err(|e| SemError::Compile(e.to_string()))
    }

    fn event(&self, ev: &CommEvent) -> Result<CEvent, SemError> {
        Ok(match ev {
            CommEvent::Input { chan, var } => CEvent::Recv { chan: self.chan_id(chan), var: self.slot(var).unwrap() },
            CommEvent::Output { chan, expr } => CEvent::Send { chan: self.chan_id(chan), expr: self.expr(expr)? },
        })
    }

    fn branches(&mut self, bs: &[(CommEvent, ProcessTerm)]) -> Result<Vec<(CEvent, NodeId)>, SemError> {
        bs.iter().map(|(ev, q)| Ok((self.event(ev)?, self.add(q, false)?))).collect()
    }

    fn push(&mut self, node: Node, term: &ProcessTerm) -> NodeId {
        self.nodes.push(node);
        self.terms.push(term.clone());
        self.nodes.len() - 1
    }

    fn add(&mut self, p: &ProcessTerm, top: bool) -> Result<NodeId, SemError> {
        let node = match p {
            ProcessTerm::Skip => Node::Skip,
            ProcessTerm::Stop => Node::Stop,
            ProcessTerm::Assign(x, e) => self.assign(&[(x.clone(), e.clone())])?,
            ProcessTerm::VecAssign(pairs) => self.assign(pairs)?,
            ProcessTerm::Wait(e) => Node::Wait(self.expr(e)?),
            ProcessTerm::Input(ch, x) => {
                Node::Comm(self.event(&CommEvent::Input { chan: ch.clone(), var: x.clone() })?)
            }
            ProcessTerm::Output(ch, e) => {
                Node::Comm(self.event(&CommEvent::Output { chan: ch.clone(), expr: e.clone() })?)
            }
            ProcessTerm::Seq(a, b) => Node::Seq(self.add(a, false)?, self.add(b, false)?),
            ProcessTerm::Guard(b, q) => Node::Guard(self.cond(b)?, self.add(q, false)?),
            ProcessTerm::IntChoice(a, b) => Node::IntChoice(self.add(a, false)?, self.add(b, false)?),
            ProcessTerm::Repeat(q, bound) => Node::Repeat(self.add(q, false)?, bound.count),
            ProcessTerm::ExtChoice(bs) => {
                if bs.is_empty() {
                    return Err(SemError::Compile("external choice with no branches".into()));
                }
                Node::ExtChoice(self.branches(bs)?)
            }
            ProcessTerm::Ode(spec, dom) | ProcessTerm::OdeInterrupt(spec, dom, _) => {
                let ode = CompiledOde {
                    vars: spec.equations.iter().map(|(x, _)| self.slot(x).unwrap()).collect(),
                    rhs: spec.equations.iter().map(|(_, e)| self.expr(e)).collect::<Result<_, _>>()?,
                    domain: self.cond(dom)?,
                };
                self.odes.push(ode);
                let ode = self.odes.len() - 1;
                let branches = match p {
                    ProcessTerm::OdeInterrupt(_, _, bs) => self.branches(bs)?,
                    _ => Vec::new(),
                };
                Node::Ode { ode, branches }
            }
            ProcessTerm::Parallel(a, b) => {
                if !top {
                    return Err(SemError::Compile("parallel composition below a sequential construct".into()));
                }
                let shared = channels(a).intersection(&channels(b)).map(|c| self.chan_id(c)).collect();
                Node::Par { left: self.add(a, true)?, right: self.add(b, true)?, shared }
            }
        };
        Ok(self.push(node, p))
    }

    fn assign(&self, pairs: &[(String, crate::syntax::Expr)]) -> Result<Node, SemError> {
        let targets = pairs
            .iter()
            .map(|(x, e)| Ok((self.slot(x).unwrap(), self.expr(e)?)))
            .collect::<Result<Vec<_>, SemError>>()?;
        let urgent = pairs.iter().all(|(x, _)| is_readiness_var(x));
        Ok(Node::Assign { targets, urgent })
    }

    /// Slot values for `v0`; variables it does not mention start at 0.
    pub fn vals_of(&self, v0: &Valuation) -> Vals {
        Vals(self.vars.iter().map(|x| v0.get(x).copied().unwrap_or(0.0)).collect())
    }

    pub fn initial_state(&self, v0: &Valuation) -> State {
        State { cfg: Config::start(self, self.root), vals: self.vals_of(v0) }
    }

    /// The state's valuation as a map.
    pub fn valuation(&self, q: &State) -> Valuation {
        self.vars.iter().cloned().zip(q.vals.0.iter().copied()).collect()
    }

    /// Values of the given variables in `q`, in order. Unknown names are
    /// reported.
    pub fn observe(&self, q: &State, names: &[String]) -> Result<Vec<f64>, String> {
        names
            .iter()
            .map(|n| self.slot(n).map(|i| q.vals.0[i]).ok_or_else(|| format!("unknown variable `{n}`")))
            .collect()
    }

    /// Slots of readiness variables, which never count as observations.
    pub fn readiness_slots(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&i| is_readiness_var(&self.vars[i])).collect()
    }

    /// The residual process term of `q`, or `None` when it has terminated.
    pub fn residual(&self, q: &State) -> Option<ProcessTerm> {
        q.cfg.residual(self)
    }

    /// Per-ODE node, the variables each compiled ODE evolves.
    pub fn ode_var_names(&self) -> Vec<Vec<String>> {
        self.odes.iter().map(|o| o.vars.iter().map(|&i| self.vars[i].clone()).collect()).collect()
    }
}
