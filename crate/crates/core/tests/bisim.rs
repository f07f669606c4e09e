use std::collections::BTreeSet;

use approx::assert_abs_diff_eq;
use hcsp::bisim::*;
use hcsp::semantics::Label;
use hcsp::syntax::{parse, Dir};
use hcsp::testkit::{self, def3_holds, naive_max_bisim, random_bounded_ts};
use hcsp::Valuation;
use rand::Rng;

fn comm(value: f64) -> Label {
    Label::Comm { chan: "ch".into(), dir: Dir::Input, value }
}

#[test]
fn label_distance_examples() {
    assert_eq!(label_distance(&Label::Tau, &Label::Tau), 0.0);
    assert_abs_diff_eq!(label_distance(&Label::delay(0.3), &Label::delay(0.5)), 0.2, epsilon = 1e-15);
    assert_eq!(label_distance(&comm(3.0), &Label::delay(0.5)), f64::INFINITY);
    assert_eq!(label_distance(&comm(3.0), &comm(-1.0)), 0.0);
    assert_eq!(label_distance(&Label::Tau, &Label::delay(0.0)), f64::INFINITY);
    assert_eq!(label_distance(&Label::Tau, &comm(0.0)), f64::INFINITY);
}

fn build(src: &str, v0: &[(&str, f64)], step: f64, tmap: &[(&str, f64)]) -> Exploration {
    let mut opts = BuildOptions::new(step);
    opts.tmap = tmap.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let v0: Valuation = v0.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    build_ts(&parse(src).unwrap(), &v0, &opts).unwrap()
}

fn delays_from_initial(t: &BoundedTS) -> Vec<Label> {
    let mut out = Vec::new();
    let mut q = t.initial;
    while let Some((l, next)) = t.adj[q].first() {
        out.push(l.clone());
        q = *next;
    }
    out
}

#[test]
fn wait_builds_a_delay_chain() {
    let e = build("wait 1", &[], 0.5, &[]);
    let labels = delays_from_initial(&e.bounded);
    assert_eq!(labels, vec![Label::delay(0.5), Label::delay(0.5), Label::Tau]);
    assert_eq!(e.bounded.len(), 4);
    assert!(e.bounded.obs_vars.is_empty());
}

#[test]
fn ode_chain_shortens_at_the_crossing() {
    let e = build("<x_dot = -x & x > 0.5>", &[("x", 1.0)], 0.25, &[("ode1", 10.0)]);
    let labels = delays_from_initial(&e.bounded);
    // the first τ resets the ODE clock
    assert_eq!(labels[0], Label::Tau);
    let labels = &labels[1..];
    assert_eq!(labels.len(), 4, "{labels:?}");
    assert_eq!(labels[..2], [Label::delay(0.25), Label::delay(0.25)]);
    let Label::Delay { d } = labels[2] else { panic!("expected the shortened delay") };
    assert_abs_diff_eq!(d, 2f64.ln() - 0.5, epsilon = 1e-6);
    assert!((d - 0.193).abs() < 1e-3);
    assert_eq!(labels[3], Label::Tau);
}

#[test]
fn equilibrium_time_cuts_the_chain() {
    let t = 10f64.ln();
    let e = build("<x_dot = -x & x > -1>", &[("x", 1.0)], 0.5, &[("ode1", t)]);
    let clock = e.program.slot(&clock_var("ode1")).unwrap();
    for s in &e.ts.states {
        assert!(s.vals.0[clock] < t);
    }
    let delays = e.bounded.adj.iter().flatten().filter(|(l, _)| matches!(l, Label::Delay { .. })).count();
    assert_eq!(delays, (t / 0.5).ceil() as usize - 1);
    assert!(e.bounded.truncated.iter().any(|&b| b));
    // clocks are not observed
    assert_eq!(e.bounded.obs_vars, vec!["x".to_string()]);
}

#[test]
fn missing_equilibrium_time_is_an_error() {
    let err = build_ts(&parse("<x_dot = -x & true>").unwrap(), &Valuation::new(), &BuildOptions::new(0.1));
    assert!(matches!(err, Err(BisimError::MissingEquilibriumTime(_))));
}

#[test]
fn state_cap_propagates() {
    let mut opts = BuildOptions::new(0.1);
    opts.state_cap = 5;
    let err = build_ts(&parse("wait 10").unwrap(), &Valuation::new(), &opts).unwrap_err();
    assert!(err.to_string().contains('5'), "{err}");
}

fn single(obs: f64) -> BoundedTS {
    BoundedTS::new(vec!["y".into()], vec![vec![obs]], vec![vec![]], 0)
}

#[test]
fn initial_relation_examples() {
    assert_eq!(initial_relation(&single(1.0), &single(1.0), 0.0).unwrap(), BTreeSet::from([(0, 0)]));
    assert!(initial_relation(&single(4.5), &single(4.62), 0.1).unwrap().is_empty());
    assert_eq!(initial_relation(&single(4.5), &single(4.58), 0.1).unwrap(), BTreeSet::from([(0, 0)]));
    let flat = BoundedTS::new(vec![], vec![vec![]], vec![vec![]], 0);
    assert!(matches!(initial_relation(&single(1.0), &flat, 1.0), Err(BisimError::DimensionMismatch(1, 0))));
}

/// A chain of `n` delays of length `d` with no observations.
fn delay_chain(n: usize, d: f64) -> BoundedTS {
    let adj = (0..=n).map(|i| if i < n { vec![(Label::delay(d), i + 1)] } else { vec![] }).collect();
    BoundedTS::new(vec![], vec![vec![]; n + 1], adj, 0)
}

#[test]
fn refine_examples() {
    let t = delay_chain(3, 1.0);
    let diag: BTreeSet<_> = (0..4).map(|i| (i, i)).collect();
    assert_eq!(refine(&diag, &t, &t, 0.0), diag);

    let stuck = BoundedTS::new(vec![], vec![vec![]], vec![vec![]], 0);
    let one = delay_chain(1, 1.0);
    assert!(!refine(&BTreeSet::from([(0, 0)]), &one, &stuck, 5.0).contains(&(0, 0)));

    let (a, b) = (delay_chain(3, 1.0), delay_chain(3, 0.9));
    let diag: BTreeSet<_> = (0..4).map(|i| (i, i)).collect();
    assert_eq!(refine(&diag, &a, &b, 0.1 + 1e-12), diag);
    assert!(refine(&diag, &a, &b, 0.05).len() < diag.len());
}

#[test]
fn max_bisim_examples() {
    let mut rng = testkit::rng(3);
    let t = random_bounded_ts(&mut rng, 6);
    let rel = max_bisim(&t, &t, 0.0, 0.0).unwrap();
    assert!((0..t.len()).all(|i| rel.contains(i, i)));

    let shifted = BoundedTS { observations: t.observations.iter().map(|o| vec![o[0] + 0.01]).collect(), ..t.clone() };
    assert!(max_bisim(&t, &shifted, 1.0, 0.0).unwrap().pairs.is_empty());
}

fn opts_for(p: &hcsp::syntax::ProcessTerm, step: f64) -> BuildOptions {
    let mut opts = BuildOptions::new(step);
    opts.tmap = testkit::uniform_tmap(p, 3.0);
    opts
}

#[test]
fn approx_bisimilar_examples() {
    let v0 = Valuation::new();
    let (w1, w2, w105) = (parse("wait 1").unwrap(), parse("wait 2").unwrap(), parse("wait 1.05").unwrap());
    assert!(!approx_bisimilar(&w1, &w2, &v0, 0.5, 0.0, &BuildOptions::new(0.5)).unwrap().bisimilar);
    // a budget covering both waits: one delay each, 0.05 apart
    assert!(approx_bisimilar(&w1, &w105, &v0, 0.1, 0.0, &BuildOptions::new(2.0)).unwrap().bisimilar);
    assert!(!approx_bisimilar(&w1, &w105, &v0, 0.01, 0.0, &BuildOptions::new(2.0)).unwrap().bisimilar);
}

#[test]
fn wait_mismatch_confirmed_by_brute_force() {
    let v0 = Valuation::new();
    let a = build_ts(&parse("wait 1").unwrap(), &v0, &BuildOptions::new(0.5)).unwrap().bounded;
    let b = build_ts(&parse("wait 2").unwrap(), &v0, &BuildOptions::new(0.5)).unwrap().bounded;
    assert!(!naive_max_bisim(&a, &b, 0.5, 0.0).contains(&(a.initial, b.initial)));
}

#[test]
fn reflexive_on_random_closed_processes() {
    let mut rng = testkit::rng(21);
    for _ in 0..50 {
        let p = testkit::random_closed_process(&mut rng, 3);
        let v0 = testkit::unit_valuation();
        for (h, eps) in [(0.0, 0.0), (0.1, 0.05)] {
            let out = approx_bisimilar(&p, &p, &v0, h, eps, &opts_for(&p, 0.5)).unwrap();
            assert!(out.bisimilar, "{p} at h={h} eps={eps}");
        }
    }
}

fn pairs_of(rng: &mut impl Rng) -> (BoundedTS, BoundedTS) {
    let n1 = rng.gen_range(1..=8);
    let n2 = rng.gen_range(1..=8);
    (random_bounded_ts(rng, n1), random_bounded_ts(rng, n2))
}

const HS: [f64; 3] = [0.0, 0.5, 1.0];
const EPSS: [f64; 3] = [0.0, 0.5, 1.0];

#[test]
fn max_bisim_is_sound_and_maximal() {
    let mut rng = testkit::rng(1);
    for _ in 0..300 {
        let (t1, t2) = pairs_of(&mut rng);
        let (h, eps) = (HS[rng.gen_range(0..3)], EPSS[rng.gen_range(0..3)]);
        let rel = max_bisim(&t1, &t2, h, eps).unwrap().pairs;
        assert!(def3_holds(&rel, &t1, &t2, h, eps));
        assert!(is_bisimulation(&rel, &t1, &t2, h, eps).is_ok());
        assert_eq!(rel, naive_max_bisim(&t1, &t2, h, eps));
        for p in 0..t1.len() {
            for q in 0..t2.len() {
                if !rel.contains(&(p, q)) {
                    let mut bigger = rel.clone();
                    bigger.insert((p, q));
                    assert!(!def3_holds(&bigger, &t1, &t2, h, eps), "({p}, {q}) could be added");
                }
            }
        }
    }
}

#[test]
fn union_of_bisimulations_is_a_bisimulation() {
    let mut rng = testkit::rng(2);
    let mut nontrivial = 0;
    for _ in 0..300 {
        let (t1, t2) = pairs_of(&mut rng);
        let (h, eps) = (HS[rng.gen_range(0..3)], EPSS[rng.gen_range(0..3)]);
        let full = max_bisim(&t1, &t2, h, eps).unwrap().pairs;
        // two sub-bisimulations: greatest fixpoints below random halves
        let split: Vec<BTreeSet<(usize, usize)>> = (0..2)
            .map(|_| {
                let mut rel: BTreeSet<_> = full.iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
                loop {
                    let next = refine(&rel, &t1, &t2, h);
                    if next == rel {
                        break rel;
                    }
                    rel = next;
                }
            })
            .collect();
        for r in &split {
            assert!(def3_holds(r, &t1, &t2, h, eps));
        }
        let union: BTreeSet<_> = split[0].union(&split[1]).copied().collect();
        if union.len() > split[0].len().max(split[1].len()) {
            nontrivial += 1;
        }
        assert!(def3_holds(&union, &t1, &t2, h, eps));
    }
    assert!(nontrivial > 0);
}

#[test]
fn max_bisim_is_monotone() {
    let mut rng = testkit::rng(4);
    for _ in 0..250 {
        let (t1, t2) = pairs_of(&mut rng);
        let (i, j) = (rng.gen_range(0..3), rng.gen_range(0..3));
        let (i2, j2) = (rng.gen_range(i..3), rng.gen_range(j..3));
        let small = max_bisim(&t1, &t2, HS[i], EPSS[j]).unwrap().pairs;
        let large = max_bisim(&t1, &t2, HS[i2], EPSS[j2]).unwrap().pairs;
        assert!(small.is_subset(&large));
    }
}

#[test]
fn max_bisim_is_symmetric() {
    let mut rng = testkit::rng(5);
    for _ in 0..250 {
        let (t1, t2) = pairs_of(&mut rng);
        let (h, eps) = (HS[rng.gen_range(0..3)], EPSS[rng.gen_range(0..3)]);
        let forward = max_bisim(&t1, &t2, h, eps).unwrap().pairs;
        let backward: BTreeSet<_> =
            max_bisim(&t2, &t1, h, eps).unwrap().pairs.into_iter().map(|(a, b)| (b, a)).collect();
        assert_eq!(forward, backward);
    }
}

/// A copy of `t` with observations moved by at most `eps` and delays by at
/// most `h`.
fn perturbed(t: &BoundedTS, rng: &mut impl Rng, h: f64, eps: f64) -> BoundedTS {
    let observations =
        t.observations.iter().map(|o| o.iter().map(|v| v + rng.gen_range(-eps..=eps)).collect()).collect();
    let adj = t
        .adj
        .iter()
        .map(|out| {
            out.iter()
                .map(|(l, d)| match l {
                    Label::Delay { d: x } => (Label::delay(x + rng.gen_range(0.0..=h)), *d),
                    other => (other.clone(), *d),
                })
                .collect()
        })
        .collect();
    BoundedTS { observations, adj, ..t.clone() }
}

#[test]
fn bisimilar_systems_reach_close_observations() {
    let mut rng = testkit::rng(6);
    let mut bisimilar = 0;
    for i in 0..300 {
        let n = rng.gen_range(1..=8);
        let t1 = random_bounded_ts(&mut rng, n);
        let (h, eps) = (0.25, 0.25);
        let t2 = if i % 2 == 0 { perturbed(&t1, &mut rng, h, eps) } else { random_bounded_ts(&mut rng, n) };
        let rel = max_bisim(&t1, &t2, h, eps).unwrap();
        if !rel.contains(t1.initial, t2.initial) {
            continue;
        }
        bisimilar += 1;
        for (a, b) in [(&t1, &t2), (&t2, &t1)] {
            for p in a.reachable() {
                let close =
                    b.reachable().into_iter().any(|q| obs_distance(&a.observations[p], &b.observations[q]) <= eps);
                assert!(close, "state {p} has no ε-close reachable partner");
            }
        }
    }
    assert!(bisimilar >= 150, "only {bisimilar} bisimilar pairs");
}

#[test]
fn weak_moves_match_reference() {
    let mut rng = testkit::rng(8);
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let t = random_bounded_ts(&mut rng, n);
        let w = WeakMoves::of(&t);
        for q in 0..t.len() {
            let got: BTreeSet<String> = w.0[q].iter().map(|(l, d)| format!("{l:?}->{d}")).collect();
            let want: BTreeSet<String> =
                testkit::weak_moves(&t, q).iter().map(|(l, d)| format!("{l:?}->{d}")).collect();
            assert_eq!(got, want, "state {q}");
        }
    }
}
