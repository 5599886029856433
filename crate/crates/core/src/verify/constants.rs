use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{mcf_radius, norm_equivalence_constants, MetricFamily};
use crate::noise::NoiseModel;
use crate::operators::{
    dense_pairing_matrix, GeneralParabolicForm, MovingSurfaceForm, NonlinearitySpec, PLaplaceForm, VhField, WeakForm,
};
use crate::spectral::{norm_sq, FourierBasis};

/// Analytic constants of the four structural hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofConstants {
    /// weak monotonicity
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    /// boundedness
    pub c3: f64,
    /// f(t) = ‖B‖²_HS, constant in t
    pub f: f64,
    pub g: f64,
}

fn hs(noise: Option<&NoiseModel>) -> f64 {
    noise.map_or(0.0, |n| n.hs_norm_sq())
}

impl ProofConstants {
    /// Heat operator on a static metric.
    pub fn heat_static(noise: Option<&NoiseModel>) -> Self {
        Self { c: 0.0, c1: 2.0, c2: 2.0, alpha: 2.0, c3: 1.0, f: hs(noise), g: 0.0 }
    }

    /// Heat operator on the circle of radius √(1 − 2nt).
    ///
    /// Monotonicity and boundedness use 2n²/(1 − 2nT); coercivity uses the
    /// generic moving-surface candidate with k₁ = n²/R(T)².
    pub fn mcf_sphere(n: usize, horizon: f64, noise: Option<&NoiseModel>) -> Result<Self> {
        let r2 = mcf_radius(horizon, n)?.powi(2);
        let nn = (n * n) as f64;
        let k1 = nn / r2;
        let (a2, b2, a3, b3) = (r2.sqrt(), 1.0, 1.0, 1.0 / r2);
        let (c1, c2) = moving_coercivity(a2, b2, a3, b3, k1);
        let c = 2.0 * nn / r2;
        Ok(Self { c, c1, c2, alpha: 2.0, c3: c, f: hs(noise), g: 0.0 })
    }

    pub fn moving_surface(form: &MovingSurfaceForm, noise: Option<&NoiseModel>) -> Self {
        let mf = form.metric();
        let (a2, b2) = norm_equivalence_constants(mf);
        let (a3, b3) = relative_inverse_bounds(mf);
        let k1 = form.k1();
        let (c1, c2) = moving_coercivity(a2, b2, a3, b3, k1);
        Self {
            c: 2.0 * b2 * k1 / a2,
            c1,
            c2,
            alpha: 2.0,
            c3: 2.0 * (b2 * b3 / a2).max(b2 * k1),
            f: hs(noise),
            g: 0.0,
        }
    }

    pub fn general_parabolic(form: &GeneralParabolicForm, noise: Option<&NoiseModel>) -> Self {
        let coef = form.coefficients();
        let (p1, q1) = form.map().v_bounds();
        let (_, q2) = form.map().h_bounds();
        let (a_lo, a_hi) = coef.a_bounds();
        let cs = coef.c_sup();
        Self {
            c: 2.0 * q2 * cs,
            c1: 2.0 * q2 * (cs + a_lo),
            c2: 2.0 * p1 * a_lo,
            alpha: 2.0,
            c3: 3.0 * q1 * a_hi.max(form.b_sup()).max(cs),
            f: hs(noise),
            g: 0.0,
        }
    }

    pub fn p_laplace(form: &PLaplaceForm, noise: Option<&NoiseModel>) -> Self {
        let p = form.p();
        let cp = lp_poincare_constant(p, form.basis().reference_factor());
        Self { c: 0.0, c1: 0.0, c2: (1.0 / cp).min(1.0), alpha: p, c3: 1.0, f: hs(noise), g: 0.0 }
    }

    /// Shift for a Lipschitz term entering the drift as −φ(u).
    pub fn with_nonlinearity(mut self, nl: &NonlinearitySpec, mf: &MetricFamily) -> Self {
        if nl.is_zero() {
            return self;
        }
        let (a2, b2) = norm_equivalence_constants(mf);
        let l = nl.lipschitz() * b2 / (a2 * a2);
        if !nl.is_monotone() {
            self.c += 2.0 * l;
        }
        self.c1 += 2.0 * l;
        self.c3 += l;
        self
    }
}

/// (c₁, c₂) = (2(b₂k₁/a₂ + a₃/b₃), 2a₂a₃/b₃).
fn moving_coercivity(a2: f64, b2: f64, a3: f64, b3: f64, k1: f64) -> (f64, f64) {
    (2.0 * (b2 * k1 / a2 + a3 / b3), 2.0 * a2 * a3 / b3)
}

/// Range of f₀/f(t), the inverse metric measured against the reference one.
fn relative_inverse_bounds(mf: &MetricFamily) -> (f64, f64) {
    let (a3, b3) = mf.inverse_metric_bounds();
    let f0 = mf.reference_factor();
    (a3 * f0, b3 * f0)
}

/// Sharp constant C in ∫|u|^p ≤ C ∫|∇u|^p for mean-zero u on the circle with
/// metric factor f₀, from the first eigenfunction of the periodic p-Laplacian.
pub fn lp_poincare_constant(p: f64, f0: f64) -> f64 {
    let pi_p = 2.0 * PI * (p - 1.0).powf(1.0 / p) / (p * (PI / p).sin());
    f0.powf(0.5 * p) * (PI / pi_p).powf(p)
}

/// Poincaré constant of a static metric: ‖u − ū‖_H ≤ C‖∇u‖_H with
/// C = μ₁^{-1/2}, μ₁ the smallest nonzero eigenvalue of the assembled Laplacian.
pub fn estimate_poincare(mf: &MetricFamily) -> Result<f64> {
    if !mf.is_static() {
        return Err(Error::Unsupported("Poincare estimate needs a static metric".into()));
    }
    let form = MovingSurfaceForm::new(mf.clone(), VhField::Zero, Some(0.0))?;
    let a = dense_pairing_matrix(&form, 0.0)?;
    let sym = (&a + a.transpose()) * -0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mu = eig
        .eigenvalues
        .iter()
        .filter(|x| **x > 1e-10 * scale)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !mu.is_finite() {
        return Err(Error::Domain("no nonzero eigenvalue in the Galerkin space".into()));
    }
    Ok(mu.powf(-0.5))
}

/// Galerkin projection of the mean-zero triangle wave with slopes ±1 (in θ).
pub fn triangle_wave(basis: &FourierBasis) -> Vec<f64> {
    let mut c = basis.project_fn(|th| {
        let x = th.rem_euclid(2.0 * PI);
        if x <= PI {
            PI / 2.0 - x
        } else {
            x - 3.0 * PI / 2.0
        }
    });
    c[0] = 0.0;
    c
}

fn lp_ratio(form: &PLaplaceForm, u: &[f64]) -> f64 {
    let (a, b) = form.lp_parts(u);
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// Lower estimate of sup ∫|u|^p / ∫|∇u|^p over the Galerkin space by
/// normalized gradient ascent on the log ratio.
pub fn estimate_lp_poincare(form: &PLaplaceForm, seed: u64, iterations: usize) -> Result<f64> {
    let basis = form.basis();
    let p = form.p();
    let dim = form.dim();
    if dim < 2 {
        return Err(Error::InvalidParameter("need at least one nonconstant mode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; dim];
    u[1] = 1.0;
    for (j, x) in u.iter_mut().enumerate().skip(2) {
        let z: f64 = StandardNormal.sample(&mut rng);
        *x = 0.01 * z / (1.0 + basis.eigenvalue(j));
    }
    let normalize = |u: &mut Vec<f64>| {
        let n = norm_sq(u).sqrt();
        u.iter_mut().for_each(|x| *x /= n);
    };
    normalize(&mut u);
    let mut r = lp_ratio(form, &u);
    let mut eta = 0.1;
    for _ in 0..iterations {
        let (a, b) = form.lp_parts(&u);
        let g = basis.synthesize(&u);
        let num = basis.project(&g.iter().map(|x| x.abs().powf(p - 2.0) * x).collect::<Vec<_>>());
        let den = form.action(0.0, &u)?;
        let mut grad: Vec<f64> = num.iter().zip(&den).map(|(n, d)| p * n / a + p * d / b).collect();
        grad[0] = 0.0;
        let gn = norm_sq(&grad).sqrt();
        if gn < 1e-14 {
            break;
        }
        let mut improved = false;
        while eta > 1e-12 {
            let mut trial: Vec<f64> = u.iter().zip(&grad).map(|(x, g)| x + eta * g / gn).collect();
            normalize(&mut trial);
            let rt = lp_ratio(form, &trial);
            if rt > r {
                u = trial;
                r = rt;
                eta *= 1.5;
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(r)
}
