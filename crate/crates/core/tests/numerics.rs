// the water-tank model fixes pi = 3.14
#![allow(clippy::approx_constant)]

use approx::assert_abs_diff_eq;
use hcsp::numerics::*;
use hcsp::syntax::{parse, ProcessTerm};
use proptest::prelude::*;

const R: f64 = 0.18;
const PI: f64 = 3.14;
const G: f64 = 9.8;
const QMAX: f64 = 2.0;

fn decay() -> FnField<impl Fn(&[f64]) -> Vec<f64>> {
    FnField::new(1, |x: &[f64]| vec![-x[0]])
}

fn growth() -> FnField<impl Fn(&[f64]) -> Vec<f64>> {
    FnField::new(1, |x: &[f64]| vec![x[0]])
}

fn ode_field(src: &str) -> OdeField {
    let ProcessTerm::Ode(spec, _) = parse(src).unwrap() else { panic!("not an ODE: {src}") };
    OdeField::new(&spec, &Default::default()).unwrap()
}

#[test]
fn euler_step_examples() {
    assert_abs_diff_eq!(euler_step(&decay(), &[1.0], 0.1).unwrap()[0], 0.9, epsilon = 1e-15);
    let still = FnField::new(1, |_: &[f64]| vec![0.0]);
    for h in [0.001, 0.3, 7.0] {
        assert_eq!(euler_step(&still, &[2.75], h).unwrap(), vec![2.75]);
    }
    let fill = ode_field("<d_dot = 2.0 - 3.14 * 0.18^2 * sqrt(2 * 9.8 * d) & true>");
    let by_hand = 4.5 + 0.05 * (QMAX - PI * R * R * (2.0 * G * 4.5f64).sqrt());
    assert_abs_diff_eq!(euler_step(&fill, &[4.5], 0.05).unwrap()[0], by_hand, epsilon = 1e-12);
}

#[test]
fn euler_step_reports_evaluation_errors() {
    let drain = ode_field("<d_dot = -sqrt(d) & true>");
    assert!(euler_step(&drain, &[-1.0], 0.1).is_err());
}

#[test]
fn reference_trajectory_examples() {
    assert_abs_diff_eq!(reference_trajectory(&decay(), &[1.0], 1.0).unwrap()[0], (-1.0f64).exp(), epsilon = 1e-6);
    let unit = FnField::new(1, |_: &[f64]| vec![1.0]);
    assert_abs_diff_eq!(reference_trajectory(&unit, &[0.0], 2.5).unwrap()[0], 2.5, epsilon = 1e-9);
    // closed valve: sqrt(d) decreases linearly
    let drain = ode_field("<d_dot = -3.14 * 0.18^2 * sqrt(2 * 9.8 * d) & true>");
    let k = PI * R * R * (2.0 * G).sqrt() / 2.0;
    let exact = (6.0f64.sqrt() - k).powi(2);
    assert_abs_diff_eq!(reference_trajectory(&drain, &[6.0], 1.0).unwrap()[0], exact, epsilon = 1e-6);
}

#[test]
fn reference_trajectory_rejects_blow_up() {
    let blow = FnField::new(1, |x: &[f64]| vec![x[0] * x[0]]);
    assert!(reference_trajectory(&blow, &[1.0], 2.0).is_err());
}

#[test]
fn equilibrium_time_examples() {
    let t = estimate_equilibrium_time(&decay(), &[1.0], &[0.0], 0.1).unwrap();
    assert!((t - 10f64.ln()).abs() <= DEFAULT_PROBE, "{t}");
    assert_eq!(estimate_equilibrium_time(&decay(), &[0.0], &[0.0], 0.1).unwrap(), 0.0);
    let shifted = FnField::new(1, |x: &[f64]| vec![-2.0 * (x[0] - 3.0)]);
    let t = estimate_equilibrium_time(&shifted, &[5.0], &[3.0], 0.2).unwrap();
    assert!((t - 10f64.ln() / 2.0).abs() <= DEFAULT_PROBE, "{t}");
}

#[test]
fn equilibrium_time_without_convergence() {
    let err = estimate_equilibrium_time_with(&growth(), &[1.0], &[0.0], 0.1, 0.01, 5.0).unwrap_err();
    assert!(matches!(err, NumericsError::GasEvidenceNotFound { .. }), "{err}");
}

fn budget(h: f64, eps1: f64, l: f64, span: f64, m2: f64) -> ErrorBudget {
    ErrorBudget { eps: 0.1, h, eps1, lipschitz: l, horizon: span, t0: 0.0, second_deriv_bound: m2, slope_bound: 1.0 }
}

#[test]
fn error_bound_examples() {
    let e = std::f64::consts::E;
    assert_abs_diff_eq!(error_bound(&budget(0.1, 0.0, 1.0, 1.0, 1.0)), 0.05 * (e - 1.0), epsilon = 1e-12);
    assert!((error_bound(&budget(0.1, 0.0, 1.0, 1.0, 1.0)) - 0.08591).abs() < 1e-5);
    assert_eq!(error_bound(&budget(0.0, 0.0, 1.0, 1.0, 1.0)), 0.0);
    assert!(error_bound(&budget(1e-12, 0.0, 1.0, 1.0, 1.0)) < 1e-11);
    assert_abs_diff_eq!(error_bound(&budget(0.0, 0.01, 1.0, 1.0, 1.0)), e * 0.01, epsilon = 1e-12);
    // L = 0: limit form (T - t0) (h/2) M2
    assert_abs_diff_eq!(error_bound(&budget(0.1, 0.0, 0.0, 2.0, 3.0)), 2.0 * 0.05 * 3.0, epsilon = 1e-12);
}

#[test]
fn error_bound_is_continuous_at_zero_lipschitz() {
    let at_zero = error_bound(&budget(0.1, 0.0, 0.0, 2.0, 3.0));
    let near = error_bound(&budget(0.1, 0.0, 1e-9, 2.0, 3.0));
    assert_abs_diff_eq!(at_zero, near, epsilon = 1e-8);
}

/// Euler against the closed form of x_dot = x on [0, 1].
fn euler_max_error(h: f64, eps1: f64) -> f64 {
    let n = (1.0 / h).round() as usize;
    let mut x = 1.0 + eps1;
    let mut worst = eps1;
    for k in 1..=n {
        x = euler_step(&growth(), &[x], h).unwrap()[0];
        worst = worst.max((x - (k as f64 * h).exp()).abs());
    }
    worst
}

#[test]
fn euler_error_within_global_bound() {
    // X'' = e^t on [0, 1], so M2 = e
    let m2 = std::f64::consts::E;
    for eps1 in [0.0, 0.01] {
        for h in [0.1, 0.05, 0.01] {
            let measured = euler_max_error(h, eps1);
            let bound = error_bound(&budget(h, eps1, 1.0, 1.0, m2));
            assert!(measured <= bound, "h={h} eps1={eps1}: {measured} > {bound}");
        }
    }
    let tight = error_bound(&budget(0.01, 0.0, 1.0, 1.0, m2));
    assert!(euler_max_error(0.01, 0.0) * 3.0 >= tight);
}

#[test]
fn euler_matches_reference_oracle() {
    let h = 0.05;
    let mut x = 1.0;
    for k in 1..=20 {
        x = euler_step(&growth(), &[x], h).unwrap()[0];
        let reference = reference_trajectory(&growth(), &[1.0], k as f64 * h).unwrap()[0];
        let b = error_bound(&budget(h, 0.0, 1.0, k as f64 * h, std::f64::consts::E));
        assert!((x - reference).abs() <= b + 1e-9);
    }
}

fn request(l: f64, span: f64, m2: f64, m: f64) -> StepRequest {
    StepRequest {
        lipschitz: l,
        horizon: span,
        t0: 0.0,
        second_deriv_bound: m2,
        slope_bound: m,
        eps1: None,
        base_step: DEFAULT_BASE_STEP,
    }
}

#[test]
fn choose_step_takes_menu_head_under_slack() {
    let b = choose_step(1e3, &request(1.0, 1.0, 1.0, 1.0)).unwrap();
    assert_eq!(b.h, DEFAULT_BASE_STEP);
    assert_abs_diff_eq!(b.eps1, 1e3 / (4.0 * std::f64::consts::E), epsilon = 1e-9);
}

#[test]
fn choose_step_infeasible_when_initial_error_dominates() {
    let req = StepRequest { eps1: Some(0.05), ..request(1.0, 1.0, 1.0, 1.0) };
    let err = choose_step(0.1, &req).unwrap_err();
    assert!(matches!(err, NumericsError::InfeasiblePrecision { .. }), "{err}");
}

#[test]
fn choose_step_for_open_valve() {
    let fill = ode_field("<d_dot = 2.0 - 3.14 * 0.18^2 * sqrt(2 * 9.8 * d) & true>");
    let (m, l, m2) = estimate_constants(&fill, &[4.5], 1.0, 0.1).unwrap();
    let req = request(l, 1.0, m2, m);
    let b = choose_step(0.1, &req).unwrap();
    assert!(b.h <= 0.05, "{b:?}");
    let growth = (l * 1.0f64).exp();
    let lhs = m * b.h + growth * b.eps1 + b.h / 2.0 * m2 * (growth - 1.0) / l;
    assert!(lhs <= 0.1, "{lhs}");
}

#[test]
fn constants_of_linear_fields() {
    let (m, l, m2) = estimate_constants(&decay(), &[1.0], 1.0, 0.0).unwrap();
    assert!((1.0..=1.25 + 1e-9).contains(&l), "L = {l}");
    assert!((1.0..=1.25 + 1e-9).contains(&m), "M = {m}");
    assert!(m2 > 0.0 && m2 <= 1.25 + 1e-9, "M2 = {m2}");
    let constant = FnField::new(2, |_: &[f64]| vec![3.0, -1.0]);
    assert_eq!(second_deriv_bound(&constant, &[0.0, 0.0], 2.0).unwrap(), 0.0);
}

#[test]
fn equilibrium_located_by_simulation() {
    let shifted = FnField::new(1, |x: &[f64]| vec![-2.0 * (x[0] - 3.0)]);
    let xbar = locate_equilibrium(&shifted, &[5.0], 1e-9, 100.0).unwrap();
    assert_abs_diff_eq!(xbar[0], 3.0, epsilon = 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn error_bound_monotone(
        h in 0.0..1.0f64, eps1 in 0.0..1.0f64, l in 0.0..3.0f64, span in 0.0..5.0f64, m2 in 0.0..5.0f64,
        bump in 0.0..1.0f64, which in 0usize..5,
    ) {
        let base = budget(h, eps1, l, span, m2);
        let mut up = base;
        match which {
            0 => up.h += bump,
            1 => up.eps1 += bump,
            2 => up.lipschitz += bump,
            3 => up.horizon += bump,
            _ => up.second_deriv_bound += bump,
        }
        prop_assert!(error_bound(&up) >= error_bound(&base) * (1.0 - 1e-12));
    }

    #[test]
    fn choose_step_is_sound(
        eps in 1e-3..10.0f64, l in 0.0..3.0f64, span in 0.0..4.0f64, m2 in 0.0..5.0f64, m in 0.0..5.0f64,
    ) {
        let req = request(l, span, m2, m);
        if let Ok(b) = choose_step(eps, &req) {
            prop_assert!(step_condition_lhs(&b) <= eps);
            prop_assert!(b.h >= MIN_STEP);
            // the next larger menu entry must fail, unless b.h is the head
            if b.h < DEFAULT_BASE_STEP {
                let bigger = ErrorBudget { h: b.h * 2.0, ..b };
                prop_assert!(step_condition_lhs(&bigger) > eps || (span > 0.0 && bigger.h > span));
            }
        }
    }

    #[test]
    fn equilibrium_time_zero_at_equilibrium(eps in 1e-6..10.0f64, xbar in -5.0..5.0f64) {
        let f = FnField::new(1, move |x: &[f64]| vec![xbar - x[0]]);
        prop_assert_eq!(estimate_equilibrium_time(&f, &[xbar], &[xbar], eps).unwrap(), 0.0);
    }
}
