//! p-Laplace–Beltrami operator div(|∇u|^{p−2}∇u) on the mean-zero subspace.
//!
//! V is W^{1,p} ∩ {∫u dν = 0} with norm (‖u‖_p^p + ‖∇u‖_p^p)^{1/p}. Inputs are
//! taken modulo constants: the constant coefficient never enters the pairing.

use crate::error::{Error, Result};
use crate::geometry::MetricFamily;
use crate::operators::{check_dim, WeakForm};
use crate::spectral::FourierBasis;

const MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PLaplaceForm {
    basis: FourierBasis,
    p: f64,
    horizon: f64,
}

impl PLaplaceForm {
    pub fn new(mf: &MetricFamily, p: f64) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p-Laplace needs p > 2, got {p}")));
        }
        if !mf.is_static() {
            return Err(Error::Unsupported("p-Laplace operator needs a static metric".into()));
        }
        Ok(Self { basis: mf.basis()?, p, horizon: mf.horizon() })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// |∇u|^{p−2} ∂_θu / f₀ on the grid, so that ⟨Au, v⟩ = −∫ flux·v' dν₀.
    fn flux(&self, du: &[f64]) -> Vec<f64> {
        let f0 = self.basis.reference_factor();
        let scale = f0.powf(-0.5 * self.p);
        du.iter().map(|d| d.abs().powf(self.p - 2.0) * d * scale).collect()
    }

    /// (∫|u|^p dν, ∫|∇u|^p dν) with the constant mode removed.
    pub fn lp_parts(&self, u: &[f64]) -> (f64, f64) {
        let mut w = u.to_vec();
        w[0] = 0.0;
        let g = self.basis.synthesize(&w);
        let d = self.basis.synthesize_deriv(&w);
        let f0 = self.basis.reference_factor();
        let a = self.basis.integrate(&g.iter().map(|x| x.abs().powf(self.p)).collect::<Vec<_>>());
        let b = self.basis.integrate(&d.iter().map(|x| (x.abs() / f0.sqrt()).powf(self.p)).collect::<Vec<_>>());
        (a, b)
    }
}

impl WeakForm for PLaplaceForm {
    fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn action(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.check_time(t)?;
        check_dim(&self.basis, u)?;
        let flux = self.flux(&self.basis.synthesize_deriv(u));
        let w = self.basis.weight();
        let n = self.basis.grid_size();
        let mut out = vec![0.0; self.dim()];
        for (j, o) in out.iter_mut().enumerate().skip(1) {
            let mut s = 0.0;
            for i in 0..n {
                s += flux[i] * self.basis.basis_deriv(j, i);
            }
            *o = -w * s;
        }
        Ok(out)
    }

    fn pairing(&self, t: f64, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_time(t)?;
        check_dim(&self.basis, u)?;
        check_dim(&self.basis, v)?;
        let flux = self.flux(&self.basis.synthesize_deriv(u));
        let dv = self.basis.synthesize_deriv(v);
        Ok(-self.basis.weight() * flux.iter().zip(&dv).map(|(a, b)| a * b).sum::<f64>())
    }

    fn pairing_line(&self, t: f64, u: &[f64], v: &[f64], x: &[f64], lambdas: &[f64]) -> Result<Vec<f64>> {
        self.check_time(t)?;
        for c in [u, v, x] {
            check_dim(&self.basis, c)?;
        }
        let (du, dv, dx) = (
            self.basis.synthesize_deriv(u),
            self.basis.synthesize_deriv(v),
            self.basis.synthesize_deriv(x),
        );
        let scale = self.basis.reference_factor().powf(-0.5 * self.p);
        let w = self.basis.weight();
        Ok(lambdas
            .iter()
            .map(|l| {
                let mut s = 0.0;
                for i in 0..du.len() {
                    let d = du[i] + l * dv[i];
                    s += d.abs().powf(self.p - 2.0) * d * dx[i];
                }
                -w * scale * s
            })
            .collect())
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn mean_zero(&self) -> bool {
        true
    }

    fn v_norm(&self, u: &[f64]) -> f64 {
        let (a, b) = self.lp_parts(u);
        (a + b).powf(1.0 / self.p)
    }
}

/// −∫ |∇u|^{p−2}⟨∇u, ∇v⟩ dν(g) for mean-zero u, v.
pub fn p_laplace_pairing(u: &[f64], v: &[f64], p: f64, mf: &MetricFamily) -> Result<f64> {
    let form = PLaplaceForm::new(mf, p)?;
    for c in [u, v] {
        check_dim(form.basis(), c)?;
        let scale = 1.0 + c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if c[0].abs() > MEAN_TOL * scale {
            return Err(Error::NotMeanZero(c[0]));
        }
    }
    form.pairing(0.0, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_metric_family, FactorProfile, ReferenceManifold};
    use std::f64::consts::PI;

    fn static_circle(modes: usize) -> MetricFamily {
        build_metric_family(ReferenceManifold::circle(modes).unwrap(), FactorProfile::Constant(1.0), 1.0).unwrap()
    }

    #[test]
    fn cosine_example() {
        let mf = static_circle(4);
        let basis = mf.basis().unwrap();
        let u = basis.project_fn(|t| t.cos());
        let p = p_laplace_pairing(&u, &u, 4.0, &mf).unwrap();
        assert!((p + 0.75 * PI).abs() < 1e-12, "{p}");
        let zero = vec![0.0; basis.dim()];
        assert_eq!(p_laplace_pairing(&zero, &u, 4.0, &mf).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mf = static_circle(3);
        let mut u = vec![0.0; 7];
        u[1] = 1.0;
        assert!(p_laplace_pairing(&u, &u, 2.0, &mf).is_err());
        u[0] = 0.5;
        assert!(matches!(p_laplace_pairing(&u, &u, 4.0, &mf), Err(Error::NotMeanZero(_))));
        let mcf = build_metric_family(ReferenceManifold::circle(3).unwrap(), FactorProfile::Mcf { n: 2 }, 0.2).unwrap();
        assert!(PLaplaceForm::new(&mcf, 4.0).is_err());
    }

    #[test]
    fn action_matches_pairing() {
        let mf = static_circle(5);
        let form = PLaplaceForm::new(&mf, 3.0).unwrap();
        let u: Vec<f64> = (0..11).map(|j| if j == 0 { 0.0 } else { (j as f64 * 0.7).sin() }).collect();
        let v: Vec<f64> = (0..11).map(|j| if j == 0 { 0.0 } else { (j as f64 * 1.3).cos() }).collect();
        let a = form.pairing(0.0, &u, &v).unwrap();
        let b: f64 = form.action(0.0, &u).unwrap().iter().zip(&v).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        let line = form.pairing_line(0.0, &u, &v, &v, &[0.0, 0.5]).unwrap();
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x + 0.5 * y).collect();
        assert!((line[1] - form.pairing(0.0, &w, &v).unwrap()).abs() < 1e-12);
        assert!((line[0] - a).abs() < 1e-12);
    }

    #[test]
    fn v_norm_of_cosine() {
        let mf = static_circle(4);
        let form = PLaplaceForm::new(&mf, 4.0).unwrap();
        let u = form.basis().project_fn(|t| t.cos());
        // ∫cos⁴ + ∫sin⁴ = 3π/2
        assert!((form.v_norm(&u).powi(4) - 1.5 * PI).abs() < 1e-12);
    }
}
