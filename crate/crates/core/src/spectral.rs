//! Real Fourier basis on the periodic chart θ ∈ [0, 2π) and trapezoid quadrature.
//!
//! Coefficient layout: index 0 is the constant mode, index `2k-1` is `cos kθ`
//! and index `2k` is `sin kθ`, for `k = 1..=K`. The basis functions are
//! orthonormal in `L²(dν(g₀))` where `dν(g₀) = √f₀ dθ` for a reference metric
//! `f₀ dθ²`, so the reference norm of a coefficient vector is its Euclidean norm.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FourierBasis {
    modes: usize,
    grid_size: usize,
    /// Reference metric factor f₀ (g₀ = f₀ dθ²).
    f0: f64,
    /// `values[j * grid_size + i] = e_j(θ_i)`
    values: Vec<f64>,
    /// θ-derivatives of the basis functions on the grid.
    derivs: Vec<f64>,
}

impl FourierBasis {
    pub fn new(modes: usize, grid_size: usize) -> Result<Self> {
        Self::with_reference_factor(modes, grid_size, 1.0)
    }

    pub fn with_reference_factor(modes: usize, grid_size: usize, f0: f64) -> Result<Self> {
        if modes < 1 {
            return Err(Error::InvalidParameter("mode count must be >= 1".into()));
        }
        if grid_size < 4 * modes + 1 {
            return Err(Error::InvalidParameter(format!(
                "grid size {grid_size} below 4K+1 = {}",
                4 * modes + 1
            )));
        }
        if !(f0 > 0.0) || !f0.is_finite() {
            return Err(Error::InvalidParameter(format!("reference factor {f0} must be positive")));
        }
        let dim = 2 * modes + 1;
        let amp = f0.powf(-0.25);
        let mut values = vec![0.0; dim * grid_size];
        let mut derivs = vec![0.0; dim * grid_size];
        let c0 = amp / (2.0 * PI).sqrt();
        let ck = amp / PI.sqrt();
        for i in 0..grid_size {
            let theta = theta_at(i, grid_size);
            values[i] = c0;
            for k in 1..=modes {
                let kf = k as f64;
                let (s, c) = (kf * theta).sin_cos();
                let jc = 2 * k - 1;
                let js = 2 * k;
                values[jc * grid_size + i] = ck * c;
                values[js * grid_size + i] = ck * s;
                derivs[jc * grid_size + i] = -ck * kf * s;
                derivs[js * grid_size + i] = ck * kf * c;
            }
        }
        Ok(Self { modes, grid_size, f0, values, derivs })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn reference_factor(&self) -> f64 {
        self.f0
    }

    pub fn theta(&self, i: usize) -> f64 {
        theta_at(i, self.grid_size)
    }

    /// Trapezoid weight of one node in `dν(g₀)`.
    pub fn weight(&self) -> f64 {
        2.0 * PI / self.grid_size as f64 * self.f0.sqrt()
    }

    /// Wavenumber of basis index `j`.
    pub fn wavenumber(j: usize) -> usize {
        (j + 1) / 2
    }

    /// Laplace–Beltrami eigenvalue of basis index `j` under the reference metric.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let k = Self::wavenumber(j) as f64;
        k * k / self.f0
    }

    pub fn basis_value(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.grid_size + i]
    }

    pub fn basis_deriv(&self, j: usize, i: usize) -> f64 {
        self.derivs[j * self.grid_size + i]
    }

    fn check_len(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: c.len() });
        }
        Ok(())
    }

    /// Grid values of the function with coefficients `c`.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        debug_assert_eq!(c.len(), self.dim());
        let n = self.grid_size;
        let mut out = vec![0.0; n];
        for (j, &cj) in c.iter().enumerate() {
            if cj == 0.0 {
                continue;
            }
            let row = &self.values[j * n..(j + 1) * n];
            for (o, b) in out.iter_mut().zip(row) {
                *o += cj * b;
            }
        }
        out
    }

    /// Grid values of the θ-derivative.
    pub fn synthesize_deriv(&self, c: &[f64]) -> Vec<f64> {
        debug_assert_eq!(c.len(), self.dim());
        let n = self.grid_size;
        let mut out = vec![0.0; n];
        for (j, &cj) in c.iter().enumerate().skip(1) {
            if cj == 0.0 {
                continue;
            }
            let row = &self.derivs[j * n..(j + 1) * n];
            for (o, b) in out.iter_mut().zip(row) {
                *o += cj * b;
            }
        }
        out
    }

    /// L²(dν(g₀)) projection of grid values onto the basis.
    pub fn project(&self, grid: &[f64]) -> Vec<f64> {
        debug_assert_eq!(grid.len(), self.grid_size);
        let n = self.grid_size;
        let w = self.weight();
        (0..self.dim())
            .map(|j| {
                let row = &self.values[j * n..(j + 1) * n];
                w * row.iter().zip(grid).map(|(b, g)| b * g).sum::<f64>()
            })
            .collect()
    }

    /// Projection of a function θ ↦ f(θ) sampled on the grid.
    pub fn project_fn(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let grid: Vec<f64> = (0..self.grid_size).map(|i| f(self.theta(i))).collect();
        self.project(&grid)
    }

    /// Quadrature of grid values against dν(g₀).
    pub fn integrate(&self, grid: &[f64]) -> f64 {
        self.weight() * grid.iter().sum::<f64>()
    }

    /// Spectral H¹ norm squared Σ (1 + λ_j) c_j².
    pub fn h1_norm_sq(&self, c: &[f64]) -> f64 {
        c.iter().enumerate().map(|(j, x)| (1.0 + self.eigenvalue(j)) * x * x).sum()
    }

    pub fn validate(&self, c: &[f64]) -> Result<()> {
        self.check_len(c)?;
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        Ok(())
    }
}

pub fn theta_at(i: usize, n: usize) -> f64 {
    2.0 * PI * i as f64 / n as f64
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
