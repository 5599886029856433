use crate::error::{Error, Result};
use crate::solver::{OperatorKind, Scenario};

const REL_TOL: f64 = 1e-8;
const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature with a relative tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // coarse magnitude guess so the tolerance is relative to the integral
    let scale = whole.abs().max(1e-300);
    recurse(f, a, b, fa, fm, fb, whole, rel_tol * scale, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// (mean multiplier, variance) of basis coefficient `j` at time t for a linear
/// diagonal scenario: the coefficient is an Ornstein–Uhlenbeck process
/// dX = d_j(t) X dt + σ_j dW.
pub fn exact_linear_mode(sc: &Scenario, j: usize, t: f64) -> Result<(f64, f64)> {
    sc.form.check_time(t)?;
    if j >= sc.dim() {
        return Err(Error::DimensionMismatch { expected: sc.dim(), got: j + 1 });
    }
    let gamma = sc
        .nl
        .linear_rate()
        .ok_or_else(|| Error::Unsupported("exact modes need a linear scenario".into()))?;
    if !sc.form.is_linear() || sc.form.diagonal(0.0)?.is_none() {
        return Err(Error::Unsupported("exact modes need a diagonal operator".into()));
    }
    let sigma = match &sc.noise {
        Some(nm) => nm.weights_for(sc.dim())?[j],
        None => 0.0,
    };
    if t == 0.0 {
        return Ok((1.0, 0.0));
    }
    let form = sc.form.clone();
    let d = move |s: f64| -> f64 { form.diagonal(s).ok().flatten().map_or(f64::NAN, |v| v[j]) - gamma };

    match sc.kind {
        OperatorKind::McfSphere { n } => {
            let nf = n as f64;
            let lam = sc.form.basis().eigenvalue(j);
            let r2 = |s: f64| 1.0 - 2.0 * nf * s;
            let mean = r2(t).powf((lam - nf * nf) / (2.0 * nf)) * (-gamma * t).exp();
            let e = (lam - nf * nf) / nf;
            let integrand = |s: f64| (r2(t) / r2(s)).powf(e) * (-2.0 * gamma * (t - s)).exp();
            let var = sigma * sigma * adaptive_simpson(&integrand, 0.0, t, REL_TOL);
            Ok((mean, var))
        }
        _ => {
            let big_d = |s: f64| adaptive_simpson(&d, 0.0, s, REL_TOL);
            let dt_ = big_d(t);
            let mean = dt_.exp();
            let integrand = |s: f64| (2.0 * (dt_ - big_d(s))).exp();
            let var = sigma * sigma * adaptive_simpson(&integrand, 0.0, t, REL_TOL);
            if !mean.is_finite() || !var.is_finite() {
                return Err(Error::Domain("exact mode integral diverged".into()));
            }
            Ok((mean, var))
        }
    }
}
