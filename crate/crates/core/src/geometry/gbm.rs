//! Geometric Brownian motion factor paths for random isotropic metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::metric::FactorTable;

/// df = r f dt + σ f dB, f(0) = 1, sampled on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmDriver {
    pub r: f64,
    pub sigma: f64,
    pub steps: usize,
    pub seed: u64,
}

impl GbmDriver {
    pub fn new(r: f64, sigma: f64, steps: usize, seed: u64) -> Result<Self> {
        let d = Self { r, sigma, steps, seed };
        d.validate()?;
        Ok(d)
    }

    /// r − σ²/2, the log-drift; must be negative.
    pub fn log_drift(&self) -> f64 {
        self.r - 0.5 * self.sigma * self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        if !self.r.is_finite() || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter("gbm parameters must be finite".into()));
        }
        if self.log_drift() >= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gbm requires r - sigma^2/2 < 0, got {} - {}^2/2 = {}",
                self.r,
                self.sigma,
                self.log_drift()
            )));
        }
        if self.steps < 1 {
            return Err(Error::InvalidParameter("gbm needs at least one step".into()));
        }
        Ok(())
    }
}

/// f_k = exp((r − σ²/2) t_k + σ B_k) with B built from N(0, Δt) increments.
pub fn gbm_factor_path(driver: &GbmDriver, horizon: f64) -> Result<FactorTable> {
    driver.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    let n = driver.steps;
    let dt = horizon / n as f64;
    let sqrt_dt = dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(driver.seed);
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut b = 0.0;
    times.push(0.0);
    values.push(1.0);
    for k in 1..=n {
        let z: f64 = StandardNormal.sample(&mut rng);
        b += sqrt_dt * z;
        let t = if k == n { horizon } else { k as f64 * dt };
        times.push(t);
        values.push((driver.log_drift() * t + driver.sigma * b).exp());
    }
    FactorTable::new(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_volatility_is_exponential() {
        let d = GbmDriver::new(-0.02, 0.0, 10, 3).unwrap();
        let tab = gbm_factor_path(&d, 1.0).unwrap();
        assert_eq!(tab.len(), 11);
        for (t, f) in tab.times().iter().zip(tab.values()) {
            assert!((f - (-0.02 * t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn positive_and_starts_at_one() {
        let d = GbmDriver::new(0.0, 0.2, 1000, 42).unwrap();
        let tab = gbm_factor_path(&d, 1.0).unwrap();
        assert_eq!(tab.values()[0], 1.0);
        assert!(tab.values().iter().all(|&f| f > 0.0));
    }

    #[test]
    fn log_increments_have_declared_mean() {
        let d = GbmDriver::new(0.0, 0.2, 1000, 42).unwrap();
        let tab = gbm_factor_path(&d, 1.0).unwrap();
        let dt = 1.0 / 1000.0;
        let incs: Vec<f64> = tab.values().windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        let m = incs.len() as f64;
        let mean = incs.iter().sum::<f64>() / m;
        let se = (0.2f64 * 0.2 * dt).sqrt() / m.sqrt();
        assert!((mean - d.log_drift() * dt).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn reproducible_bit_exact() {
        let d = GbmDriver::new(-0.1, 0.3, 200, 9).unwrap();
        let a = gbm_factor_path(&d, 2.0).unwrap();
        let b = gbm_factor_path(&d, 2.0).unwrap();
        assert_eq!(a, b);
        let c = gbm_factor_path(&GbmDriver { seed: 10, ..d }, 2.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_non_negative_log_drift() {
        let e = GbmDriver::new(0.05, 0.2, 10, 1).unwrap_err();
        assert!(e.to_string().contains("r - sigma^2/2 < 0"));
        assert!(GbmDriver::new(-0.1, 0.0, 0, 1).is_err());
    }
}
