//! Galerkin drift operators in the H₀-orthonormal Fourier basis.
//!
//! Every operator is exposed through [`WeakForm`]: its action returns the H₀
//! Riesz representative of A(t)u, so `pairing(u, v) = ⟨action(u), v⟩`.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{dot, FourierBasis};

mod assembly;
pub mod mcf;
pub mod moving;
pub mod nonlinear;
pub mod parabolic;
pub mod plaplace;

pub use mcf::{assemble_mcf_sphere, McfSphereForm};
pub use moving::{assemble_moving_surface, MovingSurfaceForm, VhField};
pub use nonlinear::{apply_nonlinearity, NonlinearitySpec, WithNonlinearity};
pub use parabolic::{assemble_general_parabolic, GeneralParabolicForm, ParabolicCoefficients};
pub use plaplace::{p_laplace_pairing, PLaplaceForm};

pub trait WeakForm: Send + Sync {
    fn basis(&self) -> &FourierBasis;

    fn dim(&self) -> usize {
        self.basis().dim()
    }

    fn horizon(&self) -> f64;

    /// H₀ Riesz representative of A(t)u.
    fn action(&self, t: f64, u: &[f64]) -> Result<Vec<f64>>;

    /// ⟨A(t)u, v⟩
    fn pairing(&self, t: f64, u: &[f64], v: &[f64]) -> Result<f64> {
        Ok(dot(&self.action(t, u)?, v))
    }

    /// The pairing integrated on the quadrature grid without going through
    /// the assembled action; used to cross-check assembly.
    fn pairing_direct(&self, t: f64, u: &[f64], v: &[f64]) -> Result<f64> {
        self.pairing(t, u, v)
    }

    /// λ ↦ ⟨A(u + λv), x⟩ for every λ in `lambdas`.
    fn pairing_line(&self, t: f64, u: &[f64], v: &[f64], x: &[f64], lambdas: &[f64]) -> Result<Vec<f64>> {
        if self.is_linear() {
            let p0 = self.pairing(t, u, x)?;
            let p1 = self.pairing(t, v, x)?;
            return Ok(lambdas.iter().map(|l| p0 + l * p1).collect());
        }
        lambdas
            .iter()
            .map(|l| {
                let w: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + l * b).collect();
                self.pairing(t, &w, x)
            })
            .collect()
    }

    fn is_linear(&self) -> bool;

    /// Inputs live in the mean-zero subspace (constant coefficient ignored).
    fn mean_zero(&self) -> bool {
        false
    }

    fn v_norm(&self, u: &[f64]) -> f64 {
        self.basis().h1_norm_sq(u).sqrt()
    }

    fn diagonal(&self, _t: f64) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }

    /// Dense matrix of a linear operator, `action(u) = M u`.
    fn matrix(&self, t: f64) -> Result<Option<DMatrix<f64>>> {
        Ok(self.diagonal(t)?.map(|d| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= -1e-12 && t <= self.horizon() + 1e-12) {
            return Err(Error::OutsideHorizon { t, horizon: self.horizon() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorRepr {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

/// Linear operator frozen at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinOperator {
    pub t: f64,
    pub modes: usize,
    pub repr: OperatorRepr,
}

impl GalerkinOperator {
    pub fn snapshot(form: &dyn WeakForm, t: f64) -> Result<Self> {
        let modes = form.basis().modes();
        if let Some(d) = form.diagonal(t)? {
            return Ok(Self { t, modes, repr: OperatorRepr::Diagonal(d) });
        }
        match form.matrix(t)? {
            Some(m) => Ok(Self { t, modes, repr: OperatorRepr::Dense(m) }),
            None => Err(Error::Unsupported("nonlinear operator has no matrix snapshot".into())),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn diagonal(&self) -> Option<&[f64]> {
        match &self.repr {
            OperatorRepr::Diagonal(d) => Some(d),
            OperatorRepr::Dense(_) => None,
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.repr {
            OperatorRepr::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            OperatorRepr::Dense(m) => m.clone(),
        }
    }

    pub fn action(&self, u: &[f64]) -> Vec<f64> {
        match &self.repr {
            OperatorRepr::Diagonal(d) => d.iter().zip(u).map(|(a, b)| a * b).collect(),
            OperatorRepr::Dense(m) => matvec(m, u),
        }
    }

    pub fn pairing(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(&self.action(u), v)
    }

    /// CSV with header `row,col,value`, value = ⟨A e_col, e_row⟩.
    pub fn to_csv(&self) -> String {
        let m = self.matrix();
        let mut s = String::from("row,col,value\n");
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let _ = writeln!(s, "{r},{c},{}", m[(r, c)]);
            }
        }
        s
    }
}

pub(crate) fn matvec(m: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)] * u[c]).sum()).collect()
}

/// ⟨A e_col, e_row⟩ evaluated through `pairing` for every basis pair.
pub fn dense_pairing_matrix(form: &dyn WeakForm, t: f64) -> Result<DMatrix<f64>> {
    let n = form.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = form.action(t, &e)?;
        for r in 0..n {
            m[(r, c)] = col[r];
        }
        e[c] = 0.0;
    }
    Ok(m)
}

pub(crate) fn check_dim(basis: &FourierBasis, u: &[f64]) -> Result<()> {
    if u.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: u.len() });
    }
    Ok(())
}

/// Zero drift.
#[derive(Debug, Clone)]
pub struct ZeroForm {
    basis: FourierBasis,
    horizon: f64,
}

impl ZeroForm {
    pub fn new(basis: FourierBasis, horizon: f64) -> Self {
        Self { basis, horizon }
    }
}

impl WeakForm for ZeroForm {
    fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn action(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.check_time(t)?;
        check_dim(&self.basis, u)?;
        Ok(vec![0.0; u.len()])
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn diagonal(&self, t: f64) -> Result<Option<Vec<f64>>> {
        self.check_time(t)?;
        Ok(Some(vec![0.0; self.dim()]))
    }
}
