//! Truncated Hilbert–Schmidt noise i dW written directly in the H₀ basis.
//!
//! Noise mode j (1-based) drives basis coefficient j−1: the constant mode gets
//! σ₁, cos θ gets σ₂ and so on.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::PullbackMap;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    sigma: Vec<f64>,
    hs_sq: f64,
}

impl NoiseModel {
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::InvalidParameter("noise needs at least one mode".into()));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise weight {s} must be positive")));
        }
        let hs_sq = sigma.iter().map(|s| s * s).sum();
        Ok(Self { sigma, hs_sq })
    }

    pub fn modes(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn hs_norm_sq(&self) -> f64 {
        self.hs_sq
    }

    /// Weights laid out over a basis of dimension `dim`, zero past J.
    pub fn weights_for(&self, dim: usize) -> Result<Vec<f64>> {
        if self.modes() > dim {
            return Err(Error::InvalidParameter(format!(
                "noise truncation J = {} exceeds basis dimension {dim}",
                self.modes()
            )));
        }
        let mut w = vec![0.0; dim];
        w[..self.modes()].copy_from_slice(&self.sigma);
        Ok(w)
    }
}

/// σ_j = 1/j for j = 1..J.
pub fn canonical_embedding(j: usize) -> Result<NoiseModel> {
    if j == 0 {
        return Err(Error::InvalidParameter("canonical embedding needs J >= 1".into()));
    }
    NoiseModel::new((1..=j).map(|k| 1.0 / k as f64).collect())
}

pub fn hs_norm(nm: &NoiseModel) -> f64 {
    nm.hs_norm_sq().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub dt: f64,
    pub xi: Vec<f64>,
}

impl WienerIncrement {
    pub fn zero(dt: f64, j: usize) -> Self {
        Self { dt, xi: vec![0.0; j] }
    }

    /// Accumulate another increment over an adjacent interval.
    pub fn absorb(&mut self, other: &WienerIncrement) {
        self.dt += other.dt;
        for (a, b) in self.xi.iter_mut().zip(&other.xi) {
            *a += b;
        }
    }
}

fn mix64(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-replica key derived from the master seed.
pub fn replica_key(master_seed: u64, replica: u64) -> u64 {
    mix64(mix64(master_seed) ^ mix64(replica.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Counter-based Gaussian stream: the draw for step s depends only on
/// (master_seed, replica, s), so steps can be regenerated in any order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseStream {
    key: u64,
    next_step: u64,
}

impl NoiseStream {
    pub fn new(master_seed: u64, replica: u64) -> Self {
        Self { key: replica_key(master_seed, replica), next_step: 0 }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn position(&self) -> u64 {
        self.next_step
    }

    pub fn seek(&mut self, step: u64) {
        self.next_step = step;
    }

    /// J standard normals for `step`.
    pub fn normals_at(&self, step: u64, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(step);
        for z in out.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
    }

    pub fn increment_at(&self, nm: &NoiseModel, dt: f64, step: u64) -> Result<WienerIncrement> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("increment dt {dt} must be positive")));
        }
        let mut xi = vec![0.0; nm.modes()];
        self.normals_at(step, &mut xi);
        let s = dt.sqrt();
        for (x, sig) in xi.iter_mut().zip(nm.sigma()) {
            *x *= s * sig;
        }
        Ok(WienerIncrement { dt, xi })
    }

    /// Sum of `count` fine increments starting at fine step `start`; the
    /// coarse-grid increment of a shared-noise coupling.
    pub fn summed_increment(&self, nm: &NoiseModel, fine_dt: f64, start: u64, count: u64) -> Result<WienerIncrement> {
        let mut acc = WienerIncrement::zero(0.0, nm.modes());
        for s in start..start + count {
            acc.absorb(&self.increment_at(nm, fine_dt, s)?);
        }
        Ok(acc)
    }
}

/// Next increment on `stream`; xi_j ~ N(0, dt σ_j²) independently.
pub fn sample_increment(nm: &NoiseModel, dt: f64, stream: &mut NoiseStream) -> Result<WienerIncrement> {
    let inc = stream.increment_at(nm, dt, stream.next_step)?;
    stream.next_step += 1;
    Ok(inc)
}

/// G_t(i ΔW) on M(t): composition with the inverse flow keeps the coefficients.
pub fn pushforward_increment(map: &PullbackMap, t: f64, inc: &WienerIncrement) -> Result<WienerIncrement> {
    Ok(WienerIncrement { dt: inc.dt, xi: map.compose(t, &inc.xi)? })
}

/// CSV with header `step,j,xi`; j is the 1-based noise mode.
pub fn increments_csv<'a>(rows: impl IntoIterator<Item = (u64, &'a WienerIncrement)>) -> String {
    let mut s = String::from("step,j,xi\n");
    for (step, inc) in rows {
        for (j, x) in inc.xi.iter().enumerate() {
            let _ = writeln!(s, "{step},{},{x}", j + 1);
        }
    }
    s
}
