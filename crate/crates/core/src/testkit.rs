//! Random instance generators and independent reference checkers used by
//! the property suites. Nothing here is optimized; the checkers recompute
//! everything from the definitions.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bisim::{label_distance, BoundedTS};
use crate::semantics::{Config, Frame, Label, Program, TransitionSystem};
use crate::syntax::{BoolExpr, CmpOp, Dir, Expr, OdeSpec, ProcessTerm};
use crate::{EquilibriumTimes, Valuation};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random finite metric transition system with `n` states, one observed
/// variable on a coarse grid, and labels drawn from τ, two delays and one
/// communication.
pub fn random_bounded_ts(rng: &mut impl Rng, n: usize) -> BoundedTS {
    let labels = [
        Label::Tau,
        Label::delay(0.5),
        Label::delay(1.0),
        Label::Comm { chan: "c".into(), dir: Dir::Output, value: 1.0 },
    ];
    let observations = (0..n).map(|_| vec![f64::from(rng.gen_range(0..4u8)) * 0.5]).collect();
    let mut adj = vec![Vec::new(); n];
    for out in adj.iter_mut() {
        for _ in 0..rng.gen_range(0..3) {
            out.push((labels.choose(rng).expect("labels").clone(), rng.gen_range(0..n)));
        }
    }
    BoundedTS::new(vec!["y".into()], observations, adj, 0)
}

/// Weak moves of `q` recomputed from scratch: `(τ)^{0,1} l (τ)^{0,1}` for
/// every non-τ label `l`, and `(τ)^{0,1,2,3}` chains for τ, plus staying.
pub fn weak_moves(t: &BoundedTS, q: usize) -> Vec<(Label, usize)> {
    let taus = |s: usize| -> Vec<usize> { t.adj[s].iter().filter(|(l, _)| l.is_tau()).map(|(_, d)| *d).collect() };
    let mut pre = vec![q];
    pre.extend(taus(q));
    let mut out = Vec::new();
    for &a in &pre {
        for (l, b) in &t.adj[a] {
            out.push((l.clone(), *b));
            for c in taus(*b) {
                out.push((l.clone(), c));
            }
        }
    }
    out.push((Label::Tau, q));
    out
}

/// Clause-by-clause check of the (h, ε)-approximate bisimulation
/// definition; truncated states are exempt from the move clauses.
pub fn def3_holds(rel: &BTreeSet<(usize, usize)>, t1: &BoundedTS, t2: &BoundedTS, h: f64, eps: f64) -> bool {
    rel.iter().all(|&pair| close(pair, t1, t2, eps) && moves_matched(pair, rel, t1, t2, h))
}

fn close((p, q): (usize, usize), t1: &BoundedTS, t2: &BoundedTS, eps: f64) -> bool {
    t1.observations[p].iter().zip(&t2.observations[q]).all(|(a, b)| (a - b).abs() <= eps)
}

fn moves_matched(
    (p, q): (usize, usize),
    rel: &BTreeSet<(usize, usize)>,
    t1: &BoundedTS,
    t2: &BoundedTS,
    h: f64,
) -> bool {
    if t1.truncated[p] || t2.truncated[q] {
        return true;
    }
    let w1 = weak_moves(t1, p);
    let w2 = weak_moves(t2, q);
    t1.adj[p].iter().all(|(l, p2)| w2.iter().any(|(l2, q2)| label_distance(l, l2) <= h && rel.contains(&(*p2, *q2))))
        && t2.adj[q]
            .iter()
            .all(|(l, q2)| w1.iter().any(|(l1, p2)| label_distance(l1, l) <= h && rel.contains(&(*p2, *q2))))
}

/// Greatest bisimulation by plain iteration: drop every failing pair and
/// repeat until nothing changes.
pub fn naive_max_bisim(t1: &BoundedTS, t2: &BoundedTS, h: f64, eps: f64) -> BTreeSet<(usize, usize)> {
    let mut rel: BTreeSet<(usize, usize)> = (0..t1.len())
        .flat_map(|p| (0..t2.len()).map(move |q| (p, q)))
        .filter(|&pair| close(pair, t1, t2, eps))
        .collect();
    loop {
        let next: BTreeSet<(usize, usize)> =
            rel.iter().copied().filter(|&pair| moves_matched(pair, &rel, t1, t2, h)).collect();
        if next == rel {
            return rel;
        }
        rel = next;
    }
}

/// A random small closed process: two sequential components sharing one
/// channel, the left writing `x`, the right writing `y`.
pub fn random_closed_process(rng: &mut impl Rng, len: usize) -> ProcessTerm {
    let left = (0..len).map(|_| random_atom(rng, "x", Some(Dir::Output))).collect::<Vec<_>>();
    let right = (0..len).map(|_| random_atom(rng, "y", Some(Dir::Input))).collect::<Vec<_>>();
    ProcessTerm::parallel(ProcessTerm::seq_all(left), ProcessTerm::seq_all(right))
}

/// A random sequential process over `x` without communication.
pub fn random_sequential_process(rng: &mut impl Rng, len: usize) -> ProcessTerm {
    ProcessTerm::seq_all((0..len).map(|_| random_atom(rng, "x", None)))
}

fn random_atom(rng: &mut impl Rng, var: &str, comm: Option<Dir>) -> ProcessTerm {
    let choices = if comm.is_some() { 7 } else { 6 };
    match rng.gen_range(0..choices) {
        0 => ProcessTerm::assign(var, Expr::Num(f64::from(rng.gen_range(1..4u8)) * 0.5)),
        1 => ProcessTerm::assign(var, Expr::add(Expr::var(var), Expr::Num(1.0))),
        2 => ProcessTerm::Wait(Expr::Num([0.5, 1.0][rng.gen_range(0..2)])),
        3 => {
            let decay = OdeSpec::new(vec![(var.to_string(), Expr::Neg(Box::new(Expr::var(var))))]);
            ProcessTerm::Ode(decay, BoolExpr::cmp(CmpOp::Gt, Expr::var(var), Expr::Num(0.3)))
        }
        4 => {
            let grow = OdeSpec::new(vec![(var.to_string(), Expr::Num(1.0))]);
            ProcessTerm::Ode(grow, BoolExpr::cmp(CmpOp::Lt, Expr::var(var), Expr::Num(2.5)))
        }
        5 => ProcessTerm::int_choice(ProcessTerm::assign(var, Expr::Num(0.5)), ProcessTerm::Wait(Expr::Num(0.5))),
        _ => match comm {
            Some(Dir::Output) => ProcessTerm::Output("c".into(), Expr::var(var)),
            _ => ProcessTerm::Input("c".into(), var.to_string()),
        },
    }
}

/// Equilibrium time `t` for every ODE of `p`, after naming them.
pub fn uniform_tmap(p: &ProcessTerm, t: f64) -> EquilibriumTimes {
    let mut named = p.clone();
    named.name_odes();
    let mut out = BTreeMap::new();
    named.for_each_ode(&mut |spec, _| {
        out.insert(spec.name.clone().unwrap_or_default(), t);
    });
    out
}

/// Initial valuation `x = 1, y = 1`.
pub fn unit_valuation() -> Valuation {
    [("x".to_string(), 1.0), ("y".to_string(), 1.0)].into_iter().collect()
}

/// Violations of the delay axioms over an explored system: the zero delay
/// must be the identity, each state has at most one destination per delay
/// length, and two consecutive delays compose within `tol` of a single one.
pub fn delay_axiom_violations(prog: &Program, ts: &TransitionSystem, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    for (i, q) in ts.states.iter().enumerate() {
        match prog.delay_by(q, 0.0) {
            Ok(Some(s)) if s == *q => {}
            other => out.push(format!("state {i}: zero delay gives {other:?}")),
        }
        let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
        for (l, d1) in &ts.adj[i] {
            let Label::Delay { d: a } = l else { continue };
            if let Some(prev) = seen.insert(a.to_bits(), *d1) {
                if prev != *d1 {
                    out.push(format!("state {i}: delay {a} has two destinations"));
                }
            }
            for (l2, d2) in &ts.adj[*d1] {
                let Label::Delay { d: b } = l2 else { continue };
                match prog.delay_by(q, a + b) {
                    Ok(Some(s)) => {
                        let far = s.vals.0.iter().zip(&ts.states[*d2].vals.0).any(|(u, v)| (u - v).abs() > tol);
                        if far || !cfg_close(&s.cfg, &ts.states[*d2].cfg, tol) {
                            out.push(format!("state {i}: delays {a} + {b} do not compose"));
                        }
                    }
                    Ok(None) => out.push(format!("state {i}: cannot delay {}", a + b)),
                    Err(e) => out.push(format!("state {i}: {e}")),
                }
            }
        }
    }
    out
}

/// Structural equality of configurations with remaining wait times
/// compared up to `tol`.
pub fn cfg_close(a: &Config, b: &Config, tol: f64) -> bool {
    match (a, b) {
        (Config::Done, Config::Done) => true,
        (Config::Seq(x), Config::Seq(y)) => {
            x.len() == y.len()
                && x.iter().zip(y).all(|(f, g)| match (f, g) {
                    (Frame::Wait(u), Frame::Wait(v)) => (f64::from_bits(*u) - f64::from_bits(*v)).abs() <= tol,
                    _ => f == g,
                })
        }
        (Config::Par(n, l1, r1), Config::Par(m, l2, r2)) => n == m && cfg_close(l1, l2, tol) && cfg_close(r1, r2, tol),
        _ => false,
    }
}
