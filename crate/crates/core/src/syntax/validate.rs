use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::ast::*;

/// Variables syntactically occurring in `p`, including readiness variables.
/// Named constants are not variables.
pub fn vars(p: &ProcessTerm) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_vars(p, &mut out);
    out
}

fn collect_event_vars(ev: &CommEvent, out: &mut BTreeSet<String>) {
    match ev {
        CommEvent::Input { var, .. } => {
            out.insert(var.clone());
        }
        CommEvent::Output { expr, .. } => expr.collect_vars(out),
    }
}

fn collect_vars(p: &ProcessTerm, out: &mut BTreeSet<String>) {
    match p {
        ProcessTerm::Skip | ProcessTerm::Stop => {}
        ProcessTerm::Assign(x, e) => {
            out.insert(x.clone());
            e.collect_vars(out);
        }
        ProcessTerm::VecAssign(pairs) => {
            for (x, e) in pairs {
                out.insert(x.clone());
                e.collect_vars(out);
            }
        }
        ProcessTerm::Wait(e) => e.collect_vars(out),
        ProcessTerm::Input(_, x) => {
            out.insert(x.clone());
        }
        ProcessTerm::Output(_, e) => e.collect_vars(out),
        ProcessTerm::Seq(a, b) | ProcessTerm::IntChoice(a, b) | ProcessTerm::Parallel(a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
        ProcessTerm::Guard(b, q) => {
            b.collect_vars(out);
            collect_vars(q, out);
        }
        ProcessTerm::Repeat(q, _) => collect_vars(q, out),
        ProcessTerm::ExtChoice(branches) => {
            for (ev, q) in branches {
                collect_event_vars(ev, out);
                collect_vars(q, out);
            }
        }
        ProcessTerm::Ode(spec, dom) | ProcessTerm::OdeInterrupt(spec, dom, _) => {
            for (x, e) in &spec.equations {
                out.insert(x.clone());
                e.collect_vars(out);
            }
            dom.collect_vars(out);
            if let ProcessTerm::OdeInterrupt(_, _, branches) = p {
                for (ev, q) in branches {
                    collect_event_vars(ev, out);
                    collect_vars(q, out);
                }
            }
        }
    }
}

/// Channel ends (name and direction) used by `p`.
pub fn channel_ends(p: &ProcessTerm) -> BTreeSet<(String, Dir)> {
    let mut out = BTreeSet::new();
    collect_ends(p, &mut out);
    out
}

fn collect_ends(p: &ProcessTerm, out: &mut BTreeSet<(String, Dir)>) {
    let branch_ends = |branches: &[(CommEvent, ProcessTerm)], out: &mut BTreeSet<(String, Dir)>| {
        for (ev, q) in branches {
            out.insert((ev.chan().to_string(), ev.dir()));
            collect_ends(q, out);
        }
    };
    match p {
        ProcessTerm::Input(ch, _) => {
            out.insert((ch.clone(), Dir::Input));
        }
        ProcessTerm::Output(ch, _) => {
            out.insert((ch.clone(), Dir::Output));
        }
        ProcessTerm::Seq(a, b) | ProcessTerm::IntChoice(a, b) | ProcessTerm::Parallel(a, b) => {
            collect_ends(a, out);
            collect_ends(b, out);
        }
        ProcessTerm::Guard(_, q) | ProcessTerm::Repeat(q, _) => collect_ends(q, out),
        ProcessTerm::ExtChoice(branches) | ProcessTerm::OdeInterrupt(_, _, branches) => branch_ends(branches, out),
        _ => {}
    }
}

/// Channels used by `p`.
pub fn channels(p: &ProcessTerm) -> BTreeSet<String> {
    channel_ends(p).into_iter().map(|(c, _)| c).collect()
}

/// Variables that `p` can change: assignment and input targets and ODE
/// variables.
pub fn written_vars(p: &ProcessTerm) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_written(p, &mut out);
    out
}

fn collect_written(p: &ProcessTerm, out: &mut BTreeSet<String>) {
    let branch_written = |branches: &[(CommEvent, ProcessTerm)], out: &mut BTreeSet<String>| {
        for (ev, q) in branches {
            if let CommEvent::Input { var, .. } = ev {
                out.insert(var.clone());
            }
            collect_written(q, out);
        }
    };
    match p {
        ProcessTerm::Assign(x, _) | ProcessTerm::Input(_, x) => {
            out.insert(x.clone());
        }
        ProcessTerm::VecAssign(pairs) => out.extend(pairs.iter().map(|(x, _)| x.clone())),
        ProcessTerm::Seq(a, b) | ProcessTerm::IntChoice(a, b) | ProcessTerm::Parallel(a, b) => {
            collect_written(a, out);
            collect_written(b, out);
        }
        ProcessTerm::Guard(_, q) | ProcessTerm::Repeat(q, _) => collect_written(q, out),
        ProcessTerm::ExtChoice(branches) => branch_written(branches, out),
        ProcessTerm::Ode(spec, _) => out.extend(spec.vars()),
        ProcessTerm::OdeInterrupt(spec, _, branches) => {
            out.extend(spec.vars());
            branch_written(branches, out);
        }
        _ => {}
    }
}

/// Variables evolved by some ODE of `p`.
pub fn ode_vars(p: &ProcessTerm) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    p.for_each_ode(&mut |spec, _| out.extend(spec.vars()));
    out
}

/// Channels with no partner: not used on both sides of any parallel
/// composition. A system is closed iff this is empty.
pub fn open_channels(p: &ProcessTerm) -> BTreeSet<String> {
    let mut connected = BTreeSet::new();
    collect_connected(p, &mut connected);
    channels(p).into_iter().filter(|c| !connected.contains(c)).collect()
}

fn collect_connected(p: &ProcessTerm, out: &mut BTreeSet<String>) {
    if let ProcessTerm::Parallel(a, b) = p {
        let ca = channels(a);
        out.extend(channels(b).into_iter().filter(|c| ca.contains(c)));
        collect_connected(a, out);
        collect_connected(b, out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DiagnosticKind {
    SharedVariable { var: String },
    SharedChannelEnd { chan: String, dir: Dir },
    SharedReadinessWriter { var: String },
    ZeroRepeatBound,
    EmptyChoice,
    DuplicateOdeVariable { var: String },
    NestedParallel,
}

/// One violated well-formedness invariant, located by a path of constructor
/// names from the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    #[serde(flatten)]
    pub kind: DiagnosticKind,
    pub path: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match &self.kind {
            DiagnosticKind::SharedVariable { var } => format!("shared variable {var}"),
            DiagnosticKind::SharedChannelEnd { chan, dir } => match dir {
                Dir::Input => format!("shared input channel {chan}"),
                Dir::Output => format!("shared output channel {chan}"),
            },
            DiagnosticKind::SharedReadinessWriter { var } => {
                format!("readiness variable {var} written by both sides")
            }
            DiagnosticKind::ZeroRepeatBound => "repetition bound must be positive".into(),
            DiagnosticKind::EmptyChoice => "choice with no branches".into(),
            DiagnosticKind::DuplicateOdeVariable { var } => format!("variable {var} has two equations"),
            DiagnosticKind::NestedParallel => "parallel composition below a sequential construct".into(),
        };
        write!(f, "{what} (at {})", if self.path.is_empty() { "root" } else { &self.path })
    }
}

/// Checks the well-formedness invariants of a process term. Readiness
/// variables are exempt from the no-sharing rule but must have one writer.
pub fn validate(p: &ProcessTerm) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check(p, "", true, &mut out);
    out
}

fn child(path: &str, seg: &str) -> String {
    if path.is_empty() {
        seg.to_string()
    } else {
        format!("{path}/{seg}")
    }
}

fn check(p: &ProcessTerm, path: &str, top: bool, out: &mut Vec<Diagnostic>) {
    let mut push = |kind| out.push(Diagnostic { kind, path: path.to_string() });
    match p {
        ProcessTerm::Parallel(a, b) => {
            if !top {
                push(DiagnosticKind::NestedParallel);
            }
            let (va, vb) = (vars(a), vars(b));
            for v in va.intersection(&vb).filter(|v| !is_readiness_var(v)) {
                push(DiagnosticKind::SharedVariable { var: v.clone() });
            }
            let (ea, eb) = (channel_ends(a), channel_ends(b));
            for (chan, dir) in ea.intersection(&eb) {
                push(DiagnosticKind::SharedChannelEnd { chan: chan.clone(), dir: *dir });
            }
            let (wa, wb) = (written_vars(a), written_vars(b));
            for v in wa.intersection(&wb).filter(|v| is_readiness_var(v)) {
                push(DiagnosticKind::SharedReadinessWriter { var: v.clone() });
            }
            check(a, &child(path, "par.left"), top, out);
            check(b, &child(path, "par.right"), top, out);
        }
        ProcessTerm::Seq(a, b) => {
            check(a, &child(path, "seq.first"), false, out);
            check(b, &child(path, "seq.second"), false, out);
        }
        ProcessTerm::IntChoice(a, b) => {
            check(a, &child(path, "choice.left"), false, out);
            check(b, &child(path, "choice.right"), false, out);
        }
        ProcessTerm::Guard(_, q) => check(q, &child(path, "guard.body"), false, out),
        ProcessTerm::Repeat(q, bound) => {
            if bound.count == 0 {
                push(DiagnosticKind::ZeroRepeatBound);
            }
            check(q, &child(path, "repeat.body"), false, out);
        }
        ProcessTerm::ExtChoice(branches) => {
            if branches.is_empty() {
                push(DiagnosticKind::EmptyChoice);
            }
            for (i, (_, q)) in branches.iter().enumerate() {
                check(q, &child(path, &format!("extchoice.{i}")), false, out);
            }
        }
        ProcessTerm::Ode(spec, _) | ProcessTerm::OdeInterrupt(spec, _, _) => {
            let mut seen = BTreeSet::new();
            for (x, _) in &spec.equations {
                if !seen.insert(x) {
                    push(DiagnosticKind::DuplicateOdeVariable { var: x.clone() });
                }
            }
            if let ProcessTerm::OdeInterrupt(_, _, branches) = p {
                if branches.is_empty() {
                    out.push(Diagnostic { kind: DiagnosticKind::EmptyChoice, path: path.to_string() });
                }
                for (i, (_, q)) in branches.iter().enumerate() {
                    check(q, &child(path, &format!("interrupt.{i}")), false, out);
                }
            }
        }
        _ => {}
    }
}
