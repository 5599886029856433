//! Heat operator on a moving surface pulled back to the reference chart.
//!
//! The weak form on (M, g_t) is −∫ g^{ij} ∂_i u ∂_j v dν(g_t) − ∫ VH u v dν(g_t).
//! For isotropic families dν(g_t) = √(f/f₀) dν(g₀) with a spatially constant
//! ratio, and the operator is reported in the H₀ pairing, i.e. divided by it:
//! ⟨Au, v⟩ = −(1/f)∫ u'v' dν₀ − ∫ VH u v dν₀.

use crate::error::{Error, Result};
use crate::geometry::{mcf_radius, MetricFamily};
use crate::operators::assembly::{mass, stiffness, AffineOperator};
use crate::operators::{check_dim, GalerkinOperator, WeakForm};
use crate::spectral::FourierBasis;

/// V·H, normal velocity times mean curvature, as a function of (θ, t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VhField {
    Zero,
    Constant(f64),
    /// −n²/R(t)², the shrinking-sphere value.
    Mcf { n: usize },
    /// mean + amp·cos θ
    Cosine { mean: f64, amp: f64 },
}

impl VhField {
    /// Spatially constant part at time t.
    fn level(&self, t: f64) -> Result<f64> {
        Ok(match *self {
            VhField::Zero => 0.0,
            VhField::Constant(c) => c,
            VhField::Mcf { n } => -((n * n) as f64) / mcf_radius(t, n)?.powi(2),
            VhField::Cosine { mean, .. } => mean,
        })
    }

    fn cos_amp(&self) -> f64 {
        match *self {
            VhField::Cosine { amp, .. } => amp,
            _ => 0.0,
        }
    }

    pub fn value(&self, theta: f64, t: f64) -> Result<f64> {
        Ok(self.level(t)? + self.cos_amp() * theta.cos())
    }

    /// sup |VH| over the time samples (exact in θ).
    pub fn sup_abs(&self, times: &[f64]) -> Result<f64> {
        let mut m = 0.0f64;
        for &t in times {
            m = m.max(self.level(t)?.abs() + self.cos_amp().abs());
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovingSurfaceForm {
    basis: FourierBasis,
    metric: MetricFamily,
    vh: VhField,
    k1: f64,
    op: AffineOperator,
}

impl MovingSurfaceForm {
    /// `k1` is the declared bound |VH| ≤ k₁; `None` takes the sampled supremum.
    pub fn new(metric: MetricFamily, vh: VhField, k1: Option<f64>) -> Result<Self> {
        let basis = metric.basis()?;
        let sup = vh.sup_abs(metric.time_samples())?;
        let k1 = match k1 {
            Some(k) if sup > k * (1.0 + 1e-12) => {
                return Err(Error::InvalidParameter(format!("|VH| reaches {sup} above declared k1 = {k}")));
            }
            Some(k) => k,
            None => sup,
        };
        let g = basis.grid_size();
        let stiff = stiffness(&basis, &vec![1.0; g]);
        let cos: Vec<f64> = (0..g).map(|i| -vh.cos_amp() * basis.theta(i).cos()).collect();
        let fixed = mass(&basis, &cos);
        Ok(Self { basis, metric, vh, k1, op: AffineOperator::new(stiff, fixed) })
    }

    pub fn metric(&self) -> &MetricFamily {
        &self.metric
    }

    pub fn vh(&self) -> VhField {
        self.vh
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    fn coefficients(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        Ok((-1.0 / self.metric.factor(t)?, -self.vh.level(t)?))
    }
}

impl WeakForm for MovingSurfaceForm {
    fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    fn horizon(&self) -> f64 {
        self.metric.horizon()
    }

    fn action(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(&self.basis, u)?;
        let (s, m) = self.coefficients(t)?;
        Ok(self.op.apply(s, m, u))
    }

    fn pairing_direct(&self, t: f64, u: &[f64], v: &[f64]) -> Result<f64> {
        check_dim(&self.basis, u)?;
        check_dim(&self.basis, v)?;
        self.check_time(t)?;
        let f = self.metric.factor(t)?;
        let (du, dv) = (self.basis.synthesize_deriv(u), self.basis.synthesize_deriv(v));
        let (gu, gv) = (self.basis.synthesize(u), self.basis.synthesize(v));
        let mut acc = 0.0;
        for i in 0..self.basis.grid_size() {
            let vh = self.vh.value(self.basis.theta(i), t)?;
            acc += -du[i] * dv[i] / f - vh * gu[i] * gv[i];
        }
        Ok(self.basis.weight() * acc)
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn diagonal(&self, t: f64) -> Result<Option<Vec<f64>>> {
        let (s, m) = self.coefficients(t)?;
        Ok(self.op.diagonal(s, m))
    }

    fn matrix(&self, t: f64) -> Result<Option<nalgebra::DMatrix<f64>>> {
        let (s, m) = self.coefficients(t)?;
        Ok(Some(self.op.matrix(s, m)))
    }
}

pub fn assemble_moving_surface(mf: &MetricFamily, vh: VhField, k1: Option<f64>, t: f64) -> Result<GalerkinOperator> {
    let form = MovingSurfaceForm::new(mf.clone(), vh, k1)?;
    GalerkinOperator::snapshot(&form, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_metric_family, FactorProfile, ReferenceManifold};
    use crate::operators::{assemble_mcf_sphere, dense_pairing_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn family(profile: FactorProfile, horizon: f64) -> MetricFamily {
        build_metric_family(ReferenceManifold::circle(6).unwrap(), profile, horizon).unwrap()
    }

    #[test]
    fn static_circle_is_laplace_spectrum() {
        for f0 in [1.0, 4.0] {
            let mf = family(FactorProfile::Constant(f0), 1.0);
            let op = assemble_moving_surface(&mf, VhField::Zero, None, 0.7).unwrap();
            let d = op.diagonal().unwrap();
            let basis = mf.basis().unwrap();
            for (j, x) in d.iter().enumerate() {
                assert!((x + basis.eigenvalue(j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mcf_velocity_matches_sphere_operator() {
        let mf = family(FactorProfile::Mcf { n: 2 }, 0.2);
        let form = MovingSurfaceForm::new(mf, VhField::Mcf { n: 2 }, None).unwrap();
        assert!((form.k1() - 20.0).abs() < 1e-9);
        let m = dense_pairing_matrix(&form, 0.1).unwrap();
        let d = assemble_mcf_sphere(2, 0.1, 6).unwrap();
        let d = d.diagonal().unwrap();
        for r in 0..13 {
            for c in 0..13 {
                let expect = if r == c { d[r] } else { 0.0 };
                assert!((m[(r, c)] - expect).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn constant_velocity_on_constants() {
        for profile in [FactorProfile::Constant(1.0), FactorProfile::Mcf { n: 2 }] {
            let mf = family(profile, 0.2);
            let form = MovingSurfaceForm::new(mf.clone(), VhField::Constant(3.0), Some(3.0)).unwrap();
            let basis = mf.basis().unwrap();
            let one = basis.project_fn(|_| 1.0);
            let p = form.pairing(0.2, &one, &one).unwrap();
            let h0: f64 = one.iter().map(|x| x * x).sum();
            assert!((p + 3.0 * h0).abs() < 1e-10);
        }
    }

    #[test]
    fn declared_bound_enforced() {
        let mf = family(FactorProfile::Constant(1.0), 1.0);
        let vh = VhField::Cosine { mean: 1.0, amp: 0.5 };
        assert!(MovingSurfaceForm::new(mf.clone(), vh, Some(1.2)).is_err());
        let f = MovingSurfaceForm::new(mf, vh, Some(1.5)).unwrap();
        assert!(f.diagonal(0.0).unwrap().is_none());
    }

    #[test]
    fn action_agrees_with_direct_quadrature() {
        let mf = family(FactorProfile::Mcf { n: 2 }, 0.2);
        let form = MovingSurfaceForm::new(mf, VhField::Cosine { mean: -2.0, amp: 0.7 }, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u: Vec<f64> = (0..13).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..13).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = rng.random_range(0.0..0.2);
            let a = form.pairing(t, &u, &v).unwrap();
            let b = form.pairing_direct(t, &u, &v).unwrap();
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
    }
}
