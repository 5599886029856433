use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solver::{build_plan, solve_coupled, solve_summary, Scenario, SolverConfig};
use crate::spectral::norm_sq;

/// Monte Carlo estimate of E sup_t ‖X(t)‖²_H.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub replicas: usize,
    pub mean: f64,
    pub std_error: f64,
    /// 3·std_error
    pub half_width: f64,
    pub samples: Vec<f64>,
}

impl MomentEstimate {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let replicas = samples.len();
        let m = replicas as f64;
        let mean = samples.iter().sum::<f64>() / m;
        let var = if replicas > 1 { samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
        let std_error = (var / m).sqrt();
        Self { replicas, mean, std_error, half_width: 3.0 * std_error, samples }
    }
}

pub fn estimate_sup_moment(sc: &Scenario, cfg: &SolverConfig, replicas: usize) -> Result<MomentEstimate> {
    if replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    let plan = build_plan(sc, cfg)?;
    let samples: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| solve_summary(sc, cfg, &plan, r).map(|s| s.sup_norm_sq))
        .collect::<Result<_>>()?;
    Ok(MomentEstimate::from_samples(samples))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub reference_dt: f64,
    pub dts: Vec<f64>,
    /// (E‖X_dt(T) − X_ref(T)‖²)^{1/2}
    pub errors: Vec<f64>,
    /// least-squares slope of log error against log dt; None when exact
    pub slope: Option<f64>,
    pub residual: f64,
    /// every error is at round-off level
    pub exact: bool,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dt,error\n");
        for (d, e) in self.dts.iter().zip(&self.errors) {
            s.push_str(&format!("{d},{e}\n"));
        }
        s
    }
}

/// Ratio `coarse / fine` as an integer, if it is one.
fn integer_ratio(coarse: f64, fine: f64) -> Option<usize> {
    let r = coarse / fine;
    let k = r.round();
    (k >= 1.0 && (r - k).abs() <= 1e-9 * r).then_some(k as usize)
}

/// Strong error at T against a fine reference driven by the same Brownian
/// path. `coarse_dts` must be strictly decreasing, and each must be an
/// integer multiple of the next finer one and of the reference step.
pub fn estimate_strong_order(
    sc: &Scenario,
    fine: &SolverConfig,
    coarse_dts: &[f64],
    replicas: usize,
) -> Result<ConvergenceReport> {
    if coarse_dts.len() < 2 || replicas == 0 {
        return Err(Error::InvalidParameter("need two step sizes and one replica".into()));
    }
    let mut ratios = Vec::with_capacity(coarse_dts.len());
    for (i, &dt) in coarse_dts.iter().enumerate() {
        let next = coarse_dts.get(i + 1).copied().unwrap_or(fine.dt);
        if !(dt > next) || integer_ratio(dt, next).is_none() {
            return Err(Error::InvalidParameter(format!("step {dt} is not an integer multiple of the finer step {next}")));
        }
        ratios.push(integer_ratio(dt, fine.dt).expect("chain of integer ratios"));
    }
    let levels: Vec<Vec<Vec<f64>>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| solve_coupled(sc, fine, &ratios, r))
        .collect::<Result<_>>()?;
    let m = replicas as f64;
    let mut ref_scale = 0.0f64;
    let errors: Vec<f64> = (0..ratios.len())
        .map(|i| {
            let mean_sq: f64 = levels
                .iter()
                .map(|l| {
                    ref_scale = ref_scale.max(norm_sq(&l[0]));
                    let d: Vec<f64> = l[i + 1].iter().zip(&l[0]).map(|(a, b)| a - b).collect();
                    norm_sq(&d)
                })
                .sum::<f64>()
                / m;
            mean_sq.sqrt()
        })
        .collect();
    let floor = 1e-12 * (1.0 + ref_scale.sqrt());
    let exact = errors.iter().all(|e| *e <= floor);
    let (slope, residual) = if exact { (None, 0.0) } else { fit_loglog(coarse_dts, &errors) };
    Ok(ConvergenceReport { reference_dt: fine.dt, dts: coarse_dts.to_vec(), errors, slope, residual, exact })
}

/// Least-squares slope and RMS residual of log y against log x.
fn fit_loglog(x: &[f64], y: &[f64]) -> (Option<f64>, f64) {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, e)| **e > 0.0).map(|(d, e)| (d.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return (None, 0.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let res = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (Some(slope), res)
}
