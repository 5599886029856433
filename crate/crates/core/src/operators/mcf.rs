//! Pulled-back heat operator on the unit sphere shrinking by mean curvature flow.
//!
//! On S(0) the drift is Δ_{g(t)}w + n²w/(1−2nt) with g^{ij}(t) = g^{ij}(0)/(1−2nt),
//! so every Fourier mode decouples: d_k(t) = (n² − λ_k)/(1−2nt).

use crate::error::{Error, Result};
use crate::geometry::mcf_radius;
use crate::operators::{check_dim, GalerkinOperator, OperatorRepr, WeakForm};
use crate::spectral::FourierBasis;

#[derive(Debug, Clone, PartialEq)]
pub struct McfSphereForm {
    basis: FourierBasis,
    n: usize,
    horizon: f64,
}

impl McfSphereForm {
    pub fn new(n: usize, basis: FourierBasis, horizon: f64) -> Result<Self> {
        if basis.reference_factor() != 1.0 {
            return Err(Error::InvalidParameter("mcf operator needs the unit reference sphere".into()));
        }
        let limit = 1.0 / (2.0 * n as f64);
        if n < 2 || !(horizon >= 0.0) || horizon >= limit {
            return Err(Error::Domain(format!("mcf horizon T = {horizon} violates T < 1/(2n) = {limit}")));
        }
        Ok(Self { basis, n, horizon })
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        let r = mcf_radius(t, self.n)?;
        let n2 = (self.n * self.n) as f64;
        let denom = r * r;
        Ok((0..self.dim()).map(|j| (n2 - self.basis.eigenvalue(j)) / denom).collect())
    }
}

impl WeakForm for McfSphereForm {
    fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn action(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(&self.basis, u)?;
        Ok(self.entries(t)?.iter().zip(u).map(|(d, x)| d * x).collect())
    }

    fn pairing_direct(&self, t: f64, u: &[f64], v: &[f64]) -> Result<f64> {
        check_dim(&self.basis, u)?;
        check_dim(&self.basis, v)?;
        self.check_time(t)?;
        let f = mcf_radius(t, self.n)?.powi(2);
        let n2 = (self.n * self.n) as f64;
        let (du, dv) = (self.basis.synthesize_deriv(u), self.basis.synthesize_deriv(v));
        let (gu, gv) = (self.basis.synthesize(u), self.basis.synthesize(v));
        let grad: f64 = du.iter().zip(&dv).map(|(a, b)| a * b).sum();
        let mass: f64 = gu.iter().zip(&gv).map(|(a, b)| a * b).sum();
        Ok(self.basis.weight() * (-grad + n2 * mass) / f)
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn diagonal(&self, t: f64) -> Result<Option<Vec<f64>>> {
        self.entries(t).map(Some)
    }
}

/// Diagonal snapshot at time t with K modes on the default grid.
pub fn assemble_mcf_sphere(n: usize, t: f64, modes: usize) -> Result<GalerkinOperator> {
    mcf_radius(t, n)?;
    let basis = FourierBasis::new(modes, 8 * modes + 1)?;
    let form = McfSphereForm::new(n, basis, t)?;
    Ok(GalerkinOperator { t, modes, repr: OperatorRepr::Diagonal(form.entries(t)?) })
}
