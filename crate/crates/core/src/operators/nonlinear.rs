//! Monotone Lipschitz Nemytskii terms f(u) entering the drift as A(u) − f(u).

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::WeakForm;
use crate::spectral::FourierBasis;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonlinearitySpec {
    Zero,
    /// γ·s
    Linear(f64),
    /// γ·tanh(s)
    Tanh(f64),
}

impl NonlinearitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NonlinearitySpec::Zero => Ok(()),
            NonlinearitySpec::Linear(g) | NonlinearitySpec::Tanh(g) => {
                if g > 0.0 && g.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("nonlinearity gamma {g} must be positive")))
                }
            }
        }
    }

    pub fn phi(&self, s: f64) -> f64 {
        match *self {
            NonlinearitySpec::Zero => 0.0,
            NonlinearitySpec::Linear(g) => g * s,
            NonlinearitySpec::Tanh(g) => g * s.tanh(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            NonlinearitySpec::Zero => 0.0,
            NonlinearitySpec::Linear(g) | NonlinearitySpec::Tanh(g) => g,
        }
    }

    /// Every catalog entry is nondecreasing for γ > 0.
    pub fn is_monotone(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NonlinearitySpec::Zero)
    }

    /// The map is linear, so it can be folded into the implicit operator.
    pub fn linear_rate(&self) -> Option<f64> {
        match *self {
            NonlinearitySpec::Zero => Some(0.0),
            NonlinearitySpec::Linear(g) => Some(g),
            NonlinearitySpec::Tanh(_) => None,
        }
    }
}

/// Grid transform, pointwise φ, projection back onto the basis.
pub fn apply_nonlinearity(nl: &NonlinearitySpec, basis: &FourierBasis, u: &[f64]) -> Vec<f64> {
    match nl.linear_rate() {
        Some(g) => u.iter().map(|x| g * x).collect(),
        None => {
            let grid: Vec<f64> = basis.synthesize(u).into_iter().map(|s| nl.phi(s)).collect();
            basis.project(&grid)
        }
    }
}

/// A − f as a single weak form.
#[derive(Clone)]
pub struct WithNonlinearity {
    base: Arc<dyn WeakForm>,
    nl: NonlinearitySpec,
}

impl WithNonlinearity {
    pub fn new(base: Arc<dyn WeakForm>, nl: NonlinearitySpec) -> Result<Self> {
        if base.mean_zero() && !nl.is_zero() {
            return Err(Error::Unsupported("nonlinearity on the mean-zero p-Laplace space".into()));
        }
        nl.validate()?;
        Ok(Self { base, nl })
    }

    pub fn base(&self) -> &Arc<dyn WeakForm> {
        &self.base
    }

    pub fn nonlinearity(&self) -> NonlinearitySpec {
        self.nl
    }
}

impl WeakForm for WithNonlinearity {
    fn basis(&self) -> &FourierBasis {
        self.base.basis()
    }

    fn horizon(&self) -> f64 {
        self.base.horizon()
    }

    fn action(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.base.action(t, u)?;
        for (x, f) in a.iter_mut().zip(apply_nonlinearity(&self.nl, self.basis(), u)) {
            *x -= f;
        }
        Ok(a)
    }

    fn pairing_direct(&self, t: f64, u: &[f64], v: &[f64]) -> Result<f64> {
        let grid_u = self.basis().synthesize(u);
        let grid_v = self.basis().synthesize(v);
        let f: Vec<f64> = grid_u.iter().zip(&grid_v).map(|(a, b)| self.nl.phi(*a) * b).collect();
        Ok(self.base.pairing_direct(t, u, v)? - self.basis().integrate(&f))
    }

    fn is_linear(&self) -> bool {
        self.base.is_linear() && self.nl.linear_rate().is_some()
    }

    fn mean_zero(&self) -> bool {
        self.base.mean_zero()
    }

    fn v_norm(&self, u: &[f64]) -> f64 {
        self.base.v_norm(u)
    }

    fn diagonal(&self, t: f64) -> Result<Option<Vec<f64>>> {
        let (Some(g), Some(mut d)) = (self.nl.linear_rate(), self.base.diagonal(t)?) else {
            return Ok(None);
        };
        d.iter_mut().for_each(|x| *x -= g);
        Ok(Some(d))
    }

    fn matrix(&self, t: f64) -> Result<Option<DMatrix<f64>>> {
        let (Some(g), Some(mut m)) = (self.nl.linear_rate(), self.base.matrix(t)?) else {
            return Ok(None);
        };
        for k in 0..m.nrows() {
            m[(k, k)] -= g;
        }
        Ok(Some(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_examples() {
        let b = FourierBasis::new(4, 33).unwrap();
        let u: Vec<f64> = (0..9).map(|j| (j as f64).sin()).collect();
        assert!(apply_nonlinearity(&NonlinearitySpec::Zero, &b, &u).iter().all(|x| *x == 0.0));
        let lin = apply_nonlinearity(&NonlinearitySpec::Linear(0.5), &b, &u);
        for (a, x) in lin.iter().zip(&u) {
            assert_eq!(*a, 0.5 * x);
        }
        let two = b.project_fn(|_| 2.0);
        let out = b.synthesize(&apply_nonlinearity(&NonlinearitySpec::Tanh(1.0), &b, &two));
        for v in out {
            assert!((v - 2f64.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn spanned_image_reproduces_grid_values() {
        let b = FourierBasis::new(4, 33).unwrap();
        let u: Vec<f64> = (0..9).map(|j| 0.1 * j as f64).collect();
        let nl = NonlinearitySpec::Linear(1.5);
        let grid = b.synthesize(&apply_nonlinearity(&nl, &b, &u));
        for (g, s) in grid.iter().zip(b.synthesize(&u)) {
            assert!((g - nl.phi(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_and_lipschitz_on_samples() {
        for nl in [NonlinearitySpec::Linear(0.3), NonlinearitySpec::Tanh(2.0)] {
            assert_eq!(nl.phi(0.0), 0.0);
            assert!(nl.is_monotone());
            for i in -50..50 {
                for j in -50..50 {
                    let (s, r) = (i as f64 * 0.13, j as f64 * 0.07);
                    assert!((nl.phi(s) - nl.phi(r)) * (s - r) >= 0.0);
                    assert!((nl.phi(s) - nl.phi(r)).abs() <= nl.lipschitz() * (s - r).abs() + 1e-15);
                }
            }
        }
        assert!(NonlinearitySpec::Tanh(-1.0).validate().is_err());
    }
}
