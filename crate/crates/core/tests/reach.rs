use std::collections::BTreeMap;

use hcsp::bisim::{approx_bisimilar, build_ts, BoundedTS, BuildOptions};
use hcsp::discretize::discretize;
use hcsp::reach::*;
use hcsp::semantics::Label;
use hcsp::syntax::{parse, parse_model};
use hcsp::{testkit, EquilibriumTimes, Valuation};
use proptest::prelude::*;
use rand::Rng;

fn one(var: &str, lo: f64, hi: f64) -> ReachBox {
    ReachBox(BTreeMap::from([(var.to_string(), Interval::new(lo, hi))]))
}

fn safe_d() -> BTreeMap<String, Interval> {
    BTreeMap::from([("d".to_string(), Interval::new(3.3, 6.6))])
}

fn close(a: Interval, lo: f64, hi: f64) -> bool {
    (a.lo - lo).abs() < 1e-12 && (a.hi - hi).abs() < 1e-12
}

#[test]
fn single_state_reach() {
    let t = BoundedTS::new(vec!["x".into()], vec![vec![4.5]], vec![vec![]], 0);
    assert_eq!(reachable(&t, &["x".into()]).unwrap(), one("x", 4.5, 4.5));
}

#[test]
fn unreachable_states_do_not_count() {
    let t = BoundedTS::new(
        vec!["x".into()],
        vec![vec![1.0], vec![2.0], vec![100.0]],
        vec![vec![(Label::Tau, 1)], vec![], vec![(Label::Tau, 0)]],
        0,
    );
    assert_eq!(reachable(&t, &["x".into()]).unwrap(), one("x", 1.0, 2.0));
}

#[test]
fn unknown_variable_is_reported() {
    let t = BoundedTS::new(vec!["x".into()], vec![vec![0.0]], vec![vec![]], 0);
    assert_eq!(reachable(&t, &["y".into()]), Err(ReachError::UnknownVariable("y".into())));
    assert!(samples_csv(&t, &["y".into()]).is_err());
}

#[test]
fn decaying_ode_reach() {
    let p = parse("<x_dot = -x & x > 0.5>").unwrap();
    let mut opts = BuildOptions::new(0.1);
    opts.tmap_eps = Some(0.01);
    opts.observe = Some(vec!["x".into()]);
    let v0: Valuation = [("x".to_string(), 1.0)].into_iter().collect();
    let ex = build_ts(&p, &v0, &opts).unwrap();
    let r = reachable(&ex.bounded, &["x".into()]).unwrap().get("x").unwrap();
    assert_eq!(r.hi, 1.0);
    assert!((r.lo - 0.5).abs() < 1e-6, "{r:?}");
}

#[test]
fn widen_examples() {
    let w = widen(&one("d", 3.42, 6.47), 0.1).get("d").unwrap();
    assert!(close(w, 3.32, 6.57), "{w:?}");
    let w = widen(&one("d", 3.41, 6.5), 0.2).get("d").unwrap();
    assert!(close(w, 3.21, 6.7), "{w:?}");
    let r = one("d", 3.41, 6.5);
    assert_eq!(widen(&r, 0.0), r);
}

#[test]
fn safety_examples() {
    assert_eq!(safety(&one("d", 3.42, 6.47), &safe_d(), 0.1).unwrap(), SafetyVerdict::Safe);
    assert_eq!(safety(&one("d", 3.41, 6.5), &safe_d(), 0.2).unwrap(), SafetyVerdict::NotProven);
    assert_eq!(safety(&one("d", 3.43, 6.46), &safe_d(), 0.05).unwrap(), SafetyVerdict::Safe);
    assert_eq!(safety(&one("v", 0.0, 1.0), &safe_d(), 0.1), Err(ReachError::MissingSafeInterval("v".into())));
}

#[test]
fn report_json_shape() {
    assert_eq!(one("d", 3.5, 6.0).to_json(), r#"{"d":[3.5,6.0]}"#);
    assert_eq!(serde_json::to_string(&SafetyVerdict::NotProven).unwrap(), r#""not-proven""#);
}

#[test]
fn samples_follow_arrival_time() {
    let t = BoundedTS::new(
        vec!["x".into(), "y".into()],
        vec![vec![0.0, 1.0], vec![0.5, 1.0], vec![1.0, 2.0]],
        vec![vec![(Label::Delay { d: 0.5 }, 1)], vec![(Label::Tau, 2)], vec![]],
        0,
    );
    let csv = samples_csv(&t, &["x".into(), "y".into()]).unwrap();
    assert_eq!(csv, "time,variable,value\n0,x,0\n0,y,1\n0.5,x,0.5\n0.5,y,1\n0.5,x,1\n0.5,y,2\n");
    assert_eq!(arrival_times(&t), vec![Some(0.0), Some(0.5), Some(0.5)]);
}

#[test]
fn continuous_reach_inside_widened_discrete_reach() {
    let m =
        parse_model("#vars x=1\n#ode f equilibrium=[0], L=1\nP ::= <f: x_dot = -x & true>\nsystem ::= P\n").unwrap();
    let (h, eps) = (0.0125, 0.1);
    let tmap = EquilibriumTimes::from([("f".to_string(), 10f64.ln())]);
    let d = discretize(&m.system, h, eps, &tmap).unwrap();
    let mut opts = BuildOptions::new(h);
    opts.tmap = tmap;
    opts.observe = Some(vec!["x".into()]);
    let out = approx_bisimilar(&m.system, &d, &m.init, h, eps, &opts).unwrap();
    assert!(out.bisimilar);
    let vars = vec!["x".to_string()];
    let cont = reachable(&out.first.bounded, &vars).unwrap();
    let disc = reachable(&out.second.bounded, &vars).unwrap();
    assert!(widen(&disc, eps + 1e-9).includes(&cont), "{cont:?} vs {disc:?}");
}

#[test]
fn containment_on_random_bisimilar_pairs() {
    let mut rng = testkit::rng(7);
    let mut found = 0;
    for _ in 0..300 {
        let (h, eps) = (0.5, 0.3);
        let t1 = testkit::random_bounded_ts(&mut rng, 6);
        // a copy with observations moved by less than ε
        let observations =
            t1.observations.iter().map(|o| o.iter().map(|v| v + rng.gen_range(-eps..=eps)).collect()).collect();
        let t2 = BoundedTS { observations, ..t1.clone() };
        let rel = testkit::naive_max_bisim(&t1, &t2, h, eps);
        if !rel.contains(&(t1.initial, t2.initial)) {
            continue;
        }
        found += 1;
        let vars = t1.obs_vars.clone();
        let r1 = reachable(&t1, &vars).unwrap();
        let r2 = reachable(&t2, &vars).unwrap();
        assert!(widen(&r2, eps + 1e-9).includes(&r1));
        assert!(widen(&r1, eps + 1e-9).includes(&r2));
    }
    assert!(found >= 200, "only {found} bisimilar pairs");
}

proptest! {
    #[test]
    fn widen_is_monotone(lo in -5.0..5.0f64, len in 0.0..5.0f64, e1 in 0.0..1.0f64, de in 0.0..1.0f64, shrink in 0.0..1.0f64) {
        let r = one("x", lo, lo + len);
        prop_assert!(widen(&r, e1 + de).includes(&widen(&r, e1)));
        let inner = one("x", lo + shrink * len / 2.0, lo + len - shrink * len / 2.0);
        prop_assert!(widen(&r, e1).includes(&widen(&inner, e1)));
        let w = widen(&r, e1).get("x").unwrap();
        prop_assert!(w.lo <= lo && w.hi >= lo + len);
    }

    #[test]
    fn safety_never_claims_safe_outside(lo in 2.0..5.0f64, len in 0.0..3.0f64, eps in 0.0..0.5f64) {
        let r = one("d", lo, lo + len);
        if safety(&r, &safe_d(), eps).unwrap() == SafetyVerdict::Safe {
            prop_assert!(lo - eps >= 3.3 && lo + len + eps <= 6.6);
        }
    }
}
