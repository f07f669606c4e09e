//! Integration oracles, Euler stepping, trajectory-sampled constants and
//! step-size selection from the Euler global error bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{CExpr, EvalError};
use crate::syntax::OdeSpec;
use crate::Valuation;

/// Safety factor applied to sampled maxima.
pub const SAFETY_FACTOR: f64 = 1.25;
/// Perturbation used for finite-difference Jacobians.
pub const FD_STEP: f64 = 1e-6;
/// Largest substep of the reference integrator.
pub const MAX_SUBSTEP: f64 = 1e-3;
/// Default probe step for equilibrium-time estimation.
pub const DEFAULT_PROBE: f64 = 0.01;
/// Number of consecutive probes that must stay inside the ε-ball.
pub const DWELL_PROBES: usize = 10;
/// Default simulation horizon when searching for convergence.
pub const DEFAULT_GAS_HORIZON: f64 = 1e4;
/// Smallest step `choose_step` will offer.
pub const MIN_STEP: f64 = 1e-6;
/// First entry of the step menu `base * 2^-k`.
pub const DEFAULT_BASE_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("GAS evidence not found: no convergence to the equilibrium within {horizon} s")]
    GasEvidenceNotFound { horizon: f64 },
    #[error("no step size meets precision {eps}: {reason}")]
    InfeasiblePrecision { eps: f64, reason: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Right-hand side of `x_dot = f(x)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError>;
}

/// A vector field given by a closure.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FnField<F> {
    pub fn new(dim: usize, f: F) -> FnField<F> {
        FnField { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let out = (self.f)(x);
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

/// The vector field of an [`OdeSpec`]. Variables other than the evolving ones
/// are frozen at their values in the context valuation.
#[derive(Debug, Clone)]
pub struct OdeField {
    vars: Vec<String>,
    rhs: Vec<CExpr>,
    frozen: Vec<f64>,
}

impl OdeField {
    pub fn new(spec: &OdeSpec, context: &Valuation) -> Result<OdeField, EvalError> {
        let vars = spec.vars();
        let mut free = std::collections::BTreeSet::new();
        for (_, e) in &spec.equations {
            e.collect_vars(&mut free);
        }
        let others: Vec<String> = free.into_iter().filter(|v| !vars.contains(v)).collect();
        let mut frozen = Vec::with_capacity(others.len());
        for v in &others {
            frozen.push(*context.get(v).ok_or_else(|| EvalError::UnknownVariable(v.clone()))?);
        }
        let resolve = |name: &str| {
            vars.iter()
                .position(|v| v == name)
                .or_else(|| others.iter().position(|v| v == name).map(|i| vars.len() + i))
        };
        let rhs = spec.equations.iter().map(|(_, e)| CExpr::compile(e, &resolve)).collect::<Result<Vec<_>, _>>()?;
        Ok(OdeField { vars, rhs, frozen })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// The evolving variables' values in `v`, in equation order.
    pub fn point(&self, v: &Valuation) -> Result<Vec<f64>, EvalError> {
        self.vars.iter().map(|x| v.get(x).copied().ok_or_else(|| EvalError::UnknownVariable(x.clone()))).collect()
    }
}

impl VectorField for OdeField {
    fn dim(&self) -> usize {
        self.vars.len()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut buf = Vec::with_capacity(x.len() + self.frozen.len());
        buf.extend_from_slice(x);
        buf.extend_from_slice(&self.frozen);
        self.rhs.iter().map(|e| e.eval(&buf)).collect()
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn check_finite(x: Vec<f64>) -> Result<Vec<f64>, NumericsError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(EvalError::NonFinite.into())
    }
}

/// One explicit Euler step `x + h f(x)`.
pub fn euler_step(f: &dyn VectorField, x: &[f64], h: f64) -> Result<Vec<f64>, NumericsError> {
    if h <= 0.0 {
        return Err(NumericsError::InvalidInput(format!("step must be positive, got {h}")));
    }
    let fx = f.eval(x)?;
    check_finite(axpy(x, h, &fx))
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step(f: &dyn VectorField, x: &[f64], h: f64) -> Result<Vec<f64>, EvalError> {
    let k1 = f.eval(x)?;
    let k2 = f.eval(&axpy(x, h / 2.0, &k1))?;
    let k3 = f.eval(&axpy(x, h / 2.0, &k2))?;
    let k4 = f.eval(&axpy(x, h, &k3))?;
    let out: Vec<f64> = (0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(EvalError::NonFinite)
    }
}

/// Integrates over `t` seconds with equal RK4 substeps no longer than
/// `max_substep`.
pub fn integrate(f: &dyn VectorField, x0: &[f64], t: f64, max_substep: f64) -> Result<Vec<f64>, EvalError> {
    if t <= 0.0 {
        return Ok(x0.to_vec());
    }
    let n = (t / max_substep).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let mut x = x0.to_vec();
    for _ in 0..n {
        x = rk4_step(f, &x, h)?;
    }
    Ok(x)
}

/// Stand-in for the exact solution `X(t, x0)`: fixed-substep RK4 with
/// substep at most `t/64` and at most 1e-3.
pub fn reference_trajectory(f: &dyn VectorField, x0: &[f64], t: f64) -> Result<Vec<f64>, NumericsError> {
    if t < 0.0 {
        return Err(NumericsError::InvalidInput(format!("negative time {t}")));
    }
    Ok(integrate(f, x0, t, (t / 64.0).min(MAX_SUBSTEP))?)
}

/// `n + 1` evenly spaced samples `(t, X(t))` over `[0, t_end]`.
pub fn sample_trajectory(
    f: &dyn VectorField,
    x0: &[f64],
    t_end: f64,
    n: usize,
) -> Result<Vec<(f64, Vec<f64>)>, NumericsError> {
    let n = n.max(1);
    let dt = t_end / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    let mut x = x0.to_vec();
    out.push((0.0, x.clone()));
    for k in 1..=n {
        x = integrate(f, &x, dt, MAX_SUBSTEP)?;
        out.push((k as f64 * dt, x.clone()));
    }
    Ok(out)
}

/// Time after which the trajectory from `x0` stays within `eps` of `xbar`,
/// using the default probe step and horizon.
pub fn estimate_equilibrium_time(
    f: &dyn VectorField,
    x0: &[f64],
    xbar: &[f64],
    eps: f64,
) -> Result<f64, NumericsError> {
    estimate_equilibrium_time_with(f, x0, xbar, eps, DEFAULT_PROBE, DEFAULT_GAS_HORIZON)
}

/// Smallest multiple of `probe` at which `|X(t) - xbar| < eps` and stays so
/// for the next [`DWELL_PROBES`] probes.
pub fn estimate_equilibrium_time_with(
    f: &dyn VectorField,
    x0: &[f64],
    xbar: &[f64],
    eps: f64,
    probe: f64,
    horizon: f64,
) -> Result<f64, NumericsError> {
    if eps <= 0.0 || probe <= 0.0 {
        return Err(NumericsError::InvalidInput("precision and probe step must be positive".into()));
    }
    if x0.len() != xbar.len() {
        return Err(NumericsError::InvalidInput("equilibrium dimension mismatch".into()));
    }
    let dist = |x: &[f64]| x.iter().zip(xbar).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let mut x = x0.to_vec();
    let mut entered: Option<usize> = None;
    let mut k = 0usize;
    loop {
        if dist(&x) < eps {
            let start = *entered.get_or_insert(k);
            if k - start >= DWELL_PROBES {
                return Ok(start as f64 * probe);
            }
        } else {
            entered = None;
        }
        if k as f64 * probe > horizon {
            return Err(NumericsError::GasEvidenceNotFound { horizon });
        }
        x = integrate(f, &x, probe, MAX_SUBSTEP)?;
        k += 1;
    }
}

/// Locates an equilibrium by simulating until `|f(x)| <= tol`.
pub fn locate_equilibrium(f: &dyn VectorField, x0: &[f64], tol: f64, horizon: f64) -> Result<Vec<f64>, NumericsError> {
    let mut x = x0.to_vec();
    let mut t = 0.0;
    loop {
        if norm_inf(&f.eval(&x)?) <= tol {
            return Ok(x);
        }
        if t > horizon {
            return Err(NumericsError::GasEvidenceNotFound { horizon });
        }
        x = integrate(f, &x, 0.1, MAX_SUBSTEP)?;
        t += 0.1;
    }
}

/// Constants of the Euler global error bound and the resulting step choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Value precision ε.
    pub eps: f64,
    /// Step size in seconds.
    pub h: f64,
    /// Initial error ε₁.
    pub eps1: f64,
    /// Lipschitz constant L of f.
    pub lipschitz: f64,
    /// Horizon T in seconds.
    pub horizon: f64,
    /// Start time t₀ in seconds.
    pub t0: f64,
    /// Bound M₂ on the second derivative of the trajectory.
    pub second_deriv_bound: f64,
    /// Bound M on the trajectory slope.
    pub slope_bound: f64,
}

fn growth_integral(l: f64, span: f64) -> f64 {
    // (e^{L span} - 1) / L, continuous at L = 0
    if l == 0.0 {
        span
    } else {
        (l * span).exp_m1() / l
    }
}

/// Global error of Euler's method:
/// `e^{(T-t0)L} ε₁ + (h/2) M₂ (e^{L(T-t0)} - 1) / L`, with the limit
/// `ε₁ + (T-t0)(h/2) M₂` at `L = 0`.
pub fn error_bound(b: &ErrorBudget) -> f64 {
    let span = b.horizon - b.t0;
    (b.lipschitz * span).exp() * b.eps1 + b.h / 2.0 * b.second_deriv_bound * growth_integral(b.lipschitz, span)
}

/// Left side of the step-size condition: the per-step slope term `M h` plus
/// the global error bound. A step is acceptable when this is at most ε.
pub fn step_condition_lhs(b: &ErrorBudget) -> f64 {
    b.slope_bound * b.h + error_bound(b)
}

/// Inputs to [`choose_step`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRequest {
    pub lipschitz: f64,
    pub horizon: f64,
    pub t0: f64,
    pub second_deriv_bound: f64,
    pub slope_bound: f64,
    /// Fixed initial error; when absent ε₁ = ε / (4 e^{(T-t0)L}).
    pub eps1: Option<f64>,
    /// First entry of the menu `base * 2^-k`.
    pub base_step: f64,
}

impl StepRequest {
    fn budget(&self, eps: f64, h: f64, eps1: f64) -> ErrorBudget {
        ErrorBudget {
            eps,
            h,
            eps1,
            lipschitz: self.lipschitz,
            horizon: self.horizon,
            t0: self.t0,
            second_deriv_bound: self.second_deriv_bound,
            slope_bound: self.slope_bound,
        }
    }
}

/// Largest step of the menu `base * 2^-k` (down to [`MIN_STEP`]) for which
/// `M h + e^{(T-t0)L} ε₁ + (h/2) M₂ (e^{L(T-t0)} - 1)/L <= ε`.
pub fn choose_step(eps: f64, req: &StepRequest) -> Result<ErrorBudget, NumericsError> {
    let span = req.horizon - req.t0;
    let fields = [req.lipschitz, span, req.second_deriv_bound, req.slope_bound, req.base_step];
    if eps <= 0.0 || fields.iter().any(|v| !v.is_finite() || *v < 0.0) || req.base_step == 0.0 {
        return Err(NumericsError::InvalidInput(
            "ε and the step menu base must be positive; constants nonnegative and finite".into(),
        ));
    }
    let growth = (req.lipschitz * span).exp();
    let eps1 = req.eps1.unwrap_or(eps / (4.0 * growth));
    if growth * eps1 >= eps {
        return Err(NumericsError::InfeasiblePrecision {
            eps,
            reason: format!("initial error term e^((T-t0)L)*eps1 = {} alone reaches eps", growth * eps1),
        });
    }
    let mut h = req.base_step;
    while h >= MIN_STEP {
        if span == 0.0 || h <= span {
            let b = req.budget(eps, h, eps1);
            if step_condition_lhs(&b) <= eps {
                return Ok(b);
            }
        }
        h /= 2.0;
    }
    Err(NumericsError::InfeasiblePrecision {
        eps,
        reason: format!("no menu step down to {MIN_STEP} satisfies the bound"),
    })
}

fn jacobian(f: &dyn VectorField, x: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
    let n = x.len();
    let f0 = f.eval(x)?;
    let mut jac = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += FD_STEP;
        xm[j] -= FD_STEP;
        let col = match (f.eval(&xp), f.eval(&xm)) {
            (Ok(fp), Ok(fm)) => fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * FD_STEP)).collect::<Vec<_>>(),
            (Ok(fp), Err(_)) => fp.iter().zip(&f0).map(|(a, b)| (a - b) / FD_STEP).collect(),
            (Err(_), Ok(fm)) => f0.iter().zip(&fm).map(|(a, b)| (a - b) / FD_STEP).collect(),
            (Err(e), Err(_)) => return Err(e),
        };
        for i in 0..n {
            jac[i][j] = col[i];
        }
    }
    Ok(jac)
}

fn operator_norm_inf(m: &[Vec<f64>]) -> f64 {
    m.iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Number of trajectory samples used by the bound estimators.
fn sample_count(t_end: f64) -> usize {
    ((t_end / 0.01).ceil() as usize).clamp(64, 4000)
}

/// `1.25 * max |f(X(t))|` over `[0, t_end]`.
pub fn slope_bound(f: &dyn VectorField, x0: &[f64], t_end: f64) -> Result<f64, NumericsError> {
    let mut m = 0.0f64;
    for (_, x) in sample_trajectory(f, x0, t_end, sample_count(t_end))? {
        m = m.max(norm_inf(&f.eval(&x)?));
    }
    Ok(SAFETY_FACTOR * m)
}

/// `1.25 * max ||J_f||` over the given points and their coordinate
/// perturbations by `inflate`, with J by central differences.
pub fn lipschitz_estimate(f: &dyn VectorField, points: &[Vec<f64>], inflate: f64) -> Result<f64, NumericsError> {
    let mut l = 0.0f64;
    for p in points {
        l = l.max(operator_norm_inf(&jacobian(f, p)?));
        if inflate > 0.0 {
            for j in 0..p.len() {
                for s in [-1.0, 1.0] {
                    let mut q = p.clone();
                    q[j] += s * inflate;
                    // the inflated region may leave the field's domain
                    if let Ok(jq) = jacobian(f, &q) {
                        l = l.max(operator_norm_inf(&jq));
                    }
                }
            }
        }
    }
    Ok(SAFETY_FACTOR * l)
}

/// `1.25 * max |J_f f| (X(t))` over `[0, t_end]`: a bound on `|X''|`.
pub fn second_deriv_bound(f: &dyn VectorField, x0: &[f64], t_end: f64) -> Result<f64, NumericsError> {
    let mut m = 0.0f64;
    for (_, x) in sample_trajectory(f, x0, t_end, sample_count(t_end))? {
        let jac = jacobian(f, &x)?;
        let fx = f.eval(&x)?;
        let jf: Vec<f64> = jac.iter().map(|row| row.iter().zip(&fx).map(|(a, b)| a * b).sum()).collect();
        m = m.max(norm_inf(&jf));
    }
    Ok(SAFETY_FACTOR * m)
}

/// Sampled constants `(M, L, M₂)` along the trajectory from `x0` over
/// `[0, t_end]`, with the Lipschitz region inflated by `eps`.
pub fn estimate_constants(
    f: &dyn VectorField,
    x0: &[f64],
    t_end: f64,
    eps: f64,
) -> Result<(f64, f64, f64), NumericsError> {
    let samples: Vec<Vec<f64>> =
        sample_trajectory(f, x0, t_end, sample_count(t_end))?.into_iter().map(|(_, x)| x).collect();
    let m = slope_bound(f, x0, t_end)?;
    let l = lipschitz_estimate(f, &samples, eps)?;
    let m2 = second_deriv_bound(f, x0, t_end)?;
    Ok((m, l, m2))
}
