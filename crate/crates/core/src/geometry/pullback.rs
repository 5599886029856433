//! Maps between the reference manifold (M, g₀) and the evolved (M, g_t).
//!
//! For isotropic families the diffeomorphism is the dilation Φ_t(x) = x·√(f(t)/f(0)).
//! In the reference θ chart composition with Φ_t⁻¹ leaves Fourier coefficients
//! unchanged, so every map here is a scalar multiple of the identity on
//! coefficient vectors:
//!
//! * [`PullbackMap::compose`] is plain composition `u ∘ Φ_t⁻¹` (the moving-surface
//!   pushforward G_t); its squared norm scales by the volume ratio √(f/f₀).
//! * [`PullbackMap::forward`] is the volume-normalized map F_t with F_t* F_t = I on H₀.

use crate::error::Result;
use crate::geometry::metric::{norm_equivalence_constants, MetricFamily};
use crate::spectral::{dot, FourierBasis};

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackMap {
    metric: MetricFamily,
    p1: f64,
    q1: f64,
    p2: f64,
    q2: f64,
}

impl PullbackMap {
    pub fn new(metric: MetricFamily) -> Self {
        let f0 = metric.reference_factor();
        let mut inv_lo = f64::INFINITY;
        let mut inv_hi = 0.0f64;
        for &t in metric.time_samples() {
            let s = metric.factor(t).expect("sample in range") / f0;
            inv_lo = inv_lo.min(1.0 / s);
            inv_hi = inv_hi.max(1.0 / s);
        }
        Self { metric, p1: inv_lo.min(1.0), q1: inv_hi.max(1.0), p2: 1.0, q2: 1.0 }
    }

    pub fn metric(&self) -> &MetricFamily {
        &self.metric
    }

    pub fn horizon(&self) -> f64 {
        self.metric.horizon()
    }

    /// (p₁, q₁): p₁‖u‖²_{V₀} ≤ ‖F_t u‖²_{V_t} ≤ q₁‖u‖²_{V₀}.
    pub fn v_bounds(&self) -> (f64, f64) {
        (self.p1, self.q1)
    }

    /// (p₂, q₂): p₂‖u‖²_{H₀} ≤ ‖F_t u‖²_{H_t} ≤ q₂‖u‖²_{H₀}.
    pub fn h_bounds(&self) -> (f64, f64) {
        (self.p2, self.q2)
    }

    /// Bounds of plain composition, i.e. (a₂, b₂).
    pub fn composition_bounds(&self) -> (f64, f64) {
        norm_equivalence_constants(&self.metric)
    }

    /// f(t)/f(0)
    pub fn stretch(&self, t: f64) -> Result<f64> {
        Ok(self.metric.factor(t)? / self.metric.reference_factor())
    }

    /// Jacobian |DΦ_t| = √(f(t)/f(0)).
    pub fn jacobian(&self, t: f64) -> Result<f64> {
        Ok(self.stretch(t)?.sqrt())
    }

    pub fn compose(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.metric.check_time(t)?;
        Ok(u.to_vec())
    }

    pub fn forward(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        let c = self.stretch(t)?.powf(-0.25);
        Ok(u.iter().map(|x| c * x).collect())
    }

    /// Adjoint of `forward` with respect to H₀ and H_t.
    pub fn adjoint(&self, t: f64, w: &[f64]) -> Result<Vec<f64>> {
        let c = self.stretch(t)?.powf(0.25);
        Ok(w.iter().map(|x| c * x).collect())
    }

    /// ⟨a, b⟩_{H_t} for functions on (M, g_t) written in the reference basis.
    pub fn h_t_inner(&self, t: f64, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(self.stretch(t)?.sqrt() * dot(a, b))
    }

    /// ‖w‖²_{V_t} for a function on (M, g_t) written in the reference basis.
    pub fn v_t_norm_sq(&self, t: f64, basis: &FourierBasis, w: &[f64]) -> Result<f64> {
        let s = self.stretch(t)?;
        let l2: f64 = w.iter().map(|x| x * x).sum();
        let grad: f64 = w.iter().enumerate().map(|(j, x)| basis.eigenvalue(j) * x * x).sum();
        Ok(s.sqrt() * l2 + grad / s.sqrt())
    }

    /// ⟨a, b⟩_{H_t} evaluated by trapezoid quadrature on the θ chart with weight √|g_t|.
    pub fn h_t_inner_quadrature(&self, t: f64, basis: &FourierBasis, a: &[f64], b: &[f64]) -> Result<f64> {
        let sqrt_det = self.metric.sqrt_det(t)?;
        let ga = basis.synthesize(a);
        let gb = basis.synthesize(b);
        let h = 2.0 * std::f64::consts::PI / basis.grid_size() as f64;
        Ok(h * sqrt_det * ga.iter().zip(&gb).map(|(x, y)| x * y).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::ReferenceManifold;
    use crate::geometry::metric::{build_metric_family, FactorProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mcf_map() -> PullbackMap {
        let mf = build_metric_family(ReferenceManifold::circle(6).unwrap(), FactorProfile::Mcf { n: 2 }, 0.2)
            .unwrap();
        PullbackMap::new(mf)
    }

    #[test]
    fn forward_at_zero_is_identity() {
        let m = mcf_map();
        let u = vec![0.3; 13];
        assert_eq!(m.forward(0.0, &u).unwrap(), u);
    }

    #[test]
    fn adjoint_identity_by_quadrature() {
        let m = mcf_map();
        let basis = m.metric().basis().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let u: Vec<f64> = (0..13).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..13).map(|_| rng.random_range(-1.0..1.0)).collect();
            let scale = dot(&u, &u).sqrt() * dot(&v, &v).sqrt();
            for _ in 0..10 {
                let t = rng.random_range(0.0..0.2);
                let fu = m.forward(t, &u).unwrap();
                let fv = m.forward(t, &v).unwrap();
                let lhs = m.h_t_inner_quadrature(t, &basis, &fu, &fv).unwrap();
                assert!((lhs - dot(&u, &v)).abs() <= 1e-9 * scale);
                let back = m.adjoint(t, &fu).unwrap();
                for (x, y) in back.iter().zip(&u) {
                    assert!((x - y).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn v_bounds_hold_on_samples() {
        let m = mcf_map();
        let basis = m.metric().basis().unwrap();
        let (p1, q1) = m.v_bounds();
        assert!((p1 - 1.0).abs() < 1e-12);
        assert!((q1 - 5.0).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let u: Vec<f64> = (0..13).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v0 = basis.h1_norm_sq(&u);
            let t = rng.random_range(0.0..=0.2);
            let fu = m.forward(t, &u).unwrap();
            let vt = m.v_t_norm_sq(t, &basis, &fu).unwrap();
            assert!(vt >= p1 * v0 * (1.0 - 1e-12) && vt <= q1 * v0 * (1.0 + 1e-12));
            let ht = m.h_t_inner(t, &fu, &fu).unwrap();
            assert!((ht - dot(&u, &u)).abs() < 1e-12 * dot(&u, &u));
        }
    }

    #[test]
    fn compose_outside_horizon_fails() {
        let m = mcf_map();
        assert!(m.compose(0.3, &[1.0]).is_err());
    }
}
