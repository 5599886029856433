use nalgebra::DMatrix;

use crate::spectral::FourierBasis;

/// Off-diagonal entries below this (relative) are quadrature round-off.
const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy)]
enum Factor {
    Value,
    Deriv,
}

fn gram(basis: &FourierBasis, w: &[f64], left: Factor, right: Factor) -> DMatrix<f64> {
    let n = basis.dim();
    let g = basis.grid_size();
    let q = basis.weight();
    let at = |f: Factor, j: usize, i: usize| match f {
        Factor::Value => basis.basis_value(j, i),
        Factor::Deriv => basis.basis_deriv(j, i),
    };
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let mut s = 0.0;
            for i in 0..g {
                s += w[i] * at(left, r, i) * at(right, c, i);
            }
            m[(r, c)] = q * s;
        }
    }
    m
}

/// `m[(i,j)] = ∫ w e_j' e_i' dν₀`
pub(crate) fn stiffness(basis: &FourierBasis, w: &[f64]) -> DMatrix<f64> {
    gram(basis, w, Factor::Deriv, Factor::Deriv)
}

/// `m[(i,j)] = ∫ w e_j e_i dν₀`
pub(crate) fn mass(basis: &FourierBasis, w: &[f64]) -> DMatrix<f64> {
    gram(basis, w, Factor::Value, Factor::Value)
}

/// `m[(i,j)] = ∫ w e_j' e_i dν₀`
pub(crate) fn advection(basis: &FourierBasis, w: &[f64]) -> DMatrix<f64> {
    gram(basis, w, Factor::Value, Factor::Deriv)
}

pub(crate) fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs())) + 1.0;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c && m[(r, c)].abs() > DIAGONAL_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// A(t) = s(t)·S + F + m(t)·I with time-independent quadrature matrices S, F.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AffineOperator {
    stiff: DMatrix<f64>,
    fixed: DMatrix<f64>,
    diag: Option<(Vec<f64>, Vec<f64>)>,
}

impl AffineOperator {
    pub(crate) fn new(stiff: DMatrix<f64>, fixed: DMatrix<f64>) -> Self {
        let diag = (is_diagonal(&stiff) && is_diagonal(&fixed))
            .then(|| (stiff.diagonal().iter().copied().collect(), fixed.diagonal().iter().copied().collect()));
        Self { stiff, fixed, diag }
    }

    pub(crate) fn diagonal(&self, s: f64, m: f64) -> Option<Vec<f64>> {
        self.diag
            .as_ref()
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| s * x + y + m).collect())
    }

    pub(crate) fn matrix(&self, s: f64, m: f64) -> DMatrix<f64> {
        let mut out = &self.stiff * s + &self.fixed;
        for k in 0..out.nrows() {
            out[(k, k)] += m;
        }
        out
    }

    pub(crate) fn apply(&self, s: f64, m: f64, u: &[f64]) -> Vec<f64> {
        if let Some(d) = self.diagonal(s, m) {
            return d.iter().zip(u).map(|(a, b)| a * b).collect();
        }
        let n = u.len();
        (0..n)
            .map(|r| {
                let mut acc = m * u[r];
                for c in 0..n {
                    acc += (s * self.stiff[(r, c)] + self.fixed[(r, c)]) * u[c];
                }
                acc
            })
            .collect()
    }
}
