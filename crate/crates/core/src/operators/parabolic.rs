//! General parabolic operator A u = div(a ∇u) − b·∇u − c̃ u conjugated by F_t.
//!
//! On the circle the coefficients are trigonometric in θ: a and c̃ are
//! `mean + cos·cos θ`; b is the θ-component of the advection field.

use crate::error::{Error, Result};
use crate::geometry::PullbackMap;
use crate::operators::assembly::{advection, mass, stiffness, AffineOperator};
use crate::operators::{check_dim, GalerkinOperator, WeakForm};
use crate::spectral::FourierBasis;

const DIV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicCoefficients {
    pub a_mean: f64,
    pub a_cos: f64,
    pub b: f64,
    /// cos θ part of b; any nonzero value has div b > 0 somewhere and is rejected.
    pub b_cos: f64,
    pub c_mean: f64,
    pub c_cos: f64,
}

impl ParabolicCoefficients {
    pub fn heat() -> Self {
        Self { a_mean: 1.0, a_cos: 0.0, b: 0.0, b_cos: 0.0, c_mean: 0.0, c_cos: 0.0 }
    }

    pub fn a_at(&self, theta: f64) -> f64 {
        self.a_mean + self.a_cos * theta.cos()
    }

    pub fn b_at(&self, theta: f64) -> f64 {
        self.b + self.b_cos * theta.cos()
    }

    pub fn c_at(&self, theta: f64) -> f64 {
        self.c_mean + self.c_cos * theta.cos()
    }

    /// (ā, b̄) with ā ≤ a ≤ b̄.
    pub fn a_bounds(&self) -> (f64, f64) {
        (self.a_mean - self.a_cos.abs(), self.a_mean + self.a_cos.abs())
    }

    pub fn c_sup(&self) -> f64 {
        self.c_mean.abs() + self.c_cos.abs()
    }

    /// Quadrature check of ā > 0 and div b ≤ 0 at every grid node.
    pub fn validate(&self, basis: &FourierBasis) -> Result<()> {
        let fields = [self.a_mean, self.a_cos, self.b, self.b_cos, self.c_mean, self.c_cos];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parabolic coefficient".into()));
        }
        let (lo, _) = self.a_bounds();
        if !(lo > 0.0) {
            return Err(Error::InvalidParameter(format!("diffusion lower bound {lo} must be positive")));
        }
        // isotropic metric: div b = ∂_θ b^θ on the chart
        let worst = (0..basis.grid_size())
            .map(|i| -self.b_cos * basis.theta(i).sin())
            .fold(f64::NEG_INFINITY, f64::max);
        if worst > DIV_TOL {
            return Err(Error::InvalidParameter(format!(
                "div b reaches {worst:.3e} > 0; on a closed curve div b <= 0 everywhere forces constant b"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralParabolicForm {
    basis: FourierBasis,
    map: PullbackMap,
    coef: ParabolicCoefficients,
    op: AffineOperator,
}

impl GeneralParabolicForm {
    pub fn new(coef: ParabolicCoefficients, map: PullbackMap) -> Result<Self> {
        let basis = map.metric().basis()?;
        coef.validate(&basis)?;
        let g = basis.grid_size();
        let grid = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { (0..g).map(|i| f(basis.theta(i))).collect() };
        let stiff = stiffness(&basis, &grid(&|th| coef.a_at(th)));
        let adv = advection(&basis, &grid(&|th| coef.b_at(th)));
        let react = mass(&basis, &grid(&|th| coef.c_at(th)));
        let fixed = -(adv + react);
        Ok(Self { basis, map, coef, op: AffineOperator::new(stiff, fixed) })
    }

    pub fn coefficients(&self) -> &ParabolicCoefficients {
        &self.coef
    }

    pub fn map(&self) -> &PullbackMap {
        &self.map
    }

    /// ‖b‖_∞ measured in the evolving metric, |b^θ|·sup_t √f.
    pub fn b_sup(&self) -> f64 {
        let (_, b1) = self.map.metric().determinant_bounds();
        (self.coef.b.abs() + self.coef.b_cos.abs()) * b1
    }

    fn stiff_scale(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(-1.0 / self.map.metric().factor(t)?)
    }
}

impl WeakForm for GeneralParabolicForm {
    fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    fn horizon(&self) -> f64 {
        self.map.horizon()
    }

    fn action(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(&self.basis, u)?;
        Ok(self.op.apply(self.stiff_scale(t)?, 0.0, u))
    }

    /// ⟨A F_t u, F_t v⟩_{H_t} integrated on (M, g_t).
    fn pairing_direct(&self, t: f64, u: &[f64], v: &[f64]) -> Result<f64> {
        check_dim(&self.basis, u)?;
        check_dim(&self.basis, v)?;
        self.check_time(t)?;
        let mf = self.map.metric();
        let (ginv, sqrt_g) = (mf.inverse_metric(t)?, mf.sqrt_det(t)?);
        let (fu, fv) = (self.map.forward(t, u)?, self.map.forward(t, v)?);
        let (du, dv) = (self.basis.synthesize_deriv(&fu), self.basis.synthesize_deriv(&fv));
        let (gu, gv) = (self.basis.synthesize(&fu), self.basis.synthesize(&fv));
        let h = 2.0 * std::f64::consts::PI / self.basis.grid_size() as f64;
        let mut acc = 0.0;
        for i in 0..self.basis.grid_size() {
            let th = self.basis.theta(i);
            acc += -self.coef.a_at(th) * ginv * du[i] * dv[i]
                - self.coef.b_at(th) * du[i] * gv[i]
                - self.coef.c_at(th) * gu[i] * gv[i];
        }
        Ok(h * sqrt_g * acc)
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn diagonal(&self, t: f64) -> Result<Option<Vec<f64>>> {
        Ok(self.op.diagonal(self.stiff_scale(t)?, 0.0))
    }

    fn matrix(&self, t: f64) -> Result<Option<nalgebra::DMatrix<f64>>> {
        Ok(Some(self.op.matrix(self.stiff_scale(t)?, 0.0)))
    }
}

pub fn assemble_general_parabolic(coef: ParabolicCoefficients, map: &PullbackMap, t: f64) -> Result<GalerkinOperator> {
    let form = GeneralParabolicForm::new(coef, map.clone())?;
    GalerkinOperator::snapshot(&form, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_metric_family, FactorProfile, FactorTable, ReferenceManifold};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(profile: FactorProfile, horizon: f64) -> PullbackMap {
        PullbackMap::new(build_metric_family(ReferenceManifold::circle(5).unwrap(), profile, horizon).unwrap())
    }

    #[test]
    fn reduces_to_laplace_beltrami() {
        let m = map(FactorProfile::Constant(1.0), 1.0);
        let op = assemble_general_parabolic(ParabolicCoefficients::heat(), &m, 0.5).unwrap();
        for (j, d) in op.diagonal().unwrap().iter().enumerate() {
            let k = FourierBasis::wavenumber(j) as f64;
            assert!((d + k * k).abs() < 1e-10);
        }
        let c = ParabolicCoefficients { c_mean: 0.3, ..ParabolicCoefficients::heat() };
        let op = assemble_general_parabolic(c, &m, 0.5).unwrap();
        for (j, d) in op.diagonal().unwrap().iter().enumerate() {
            let k = FourierBasis::wavenumber(j) as f64;
            assert!((d + k * k + 0.3).abs() < 1e-10);
        }
    }

    #[test]
    fn volume_factors_cancel_under_conjugation() {
        let tab = FactorTable::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.5, 0.6]).unwrap();
        let m = map(FactorProfile::Table(tab), 1.0);
        let form = GeneralParabolicForm::new(ParabolicCoefficients::heat(), m.clone()).unwrap();
        let basis = form.basis().clone();
        for t in [0.2, 0.5, 0.9] {
            let f = m.metric().factor(t).unwrap();
            let d = form.diagonal(t).unwrap().unwrap();
            for j in 0..basis.dim() {
                let mut e = vec![0.0; basis.dim()];
                e[j] = 1.0;
                let brute = form.pairing_direct(t, &e, &e).unwrap();
                assert!((brute + basis.eigenvalue(j) / f).abs() < 1e-10, "t={t} j={j}");
                assert!((d[j] - brute).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn full_coefficients_agree_with_brute_force() {
        let m = map(FactorProfile::Mcf { n: 2 }, 0.2);
        let coef = ParabolicCoefficients { a_mean: 1.5, a_cos: 0.5, b: 0.7, b_cos: 0.0, c_mean: -0.4, c_cos: 0.3 };
        let form = GeneralParabolicForm::new(coef, m).unwrap();
        assert!(form.diagonal(0.0).unwrap().is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let u: Vec<f64> = (0..11).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..11).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = rng.random_range(0.0..0.2);
            let a = form.pairing(t, &u, &v).unwrap();
            let b = form.pairing_direct(t, &u, &v).unwrap();
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn coefficient_checks() {
        let basis = FourierBasis::new(4, 33).unwrap();
        let bad_a = ParabolicCoefficients { a_mean: 0.5, a_cos: 0.6, ..ParabolicCoefficients::heat() };
        assert!(bad_a.validate(&basis).is_err());
        let bad_b = ParabolicCoefficients { b_cos: 0.1, ..ParabolicCoefficients::heat() };
        let e = bad_b.validate(&basis).unwrap_err();
        assert!(e.to_string().contains("div b"));
        let ok = ParabolicCoefficients { b: -2.0, ..ParabolicCoefficients::heat() };
        assert!(ok.validate(&basis).is_ok());
    }
}
