//! Numerical checks of hemicontinuity, weak monotonicity, coercivity and
//! boundedness on random probes.
//!
//! Probes draw coefficients i.i.d. N(0, 1/(1+λ_k)) from one seeded stream in
//! a fixed order, so the first N samples of a run with N' > N samples are
//! exactly the N-sample run.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::operators::WeakForm;
use crate::spectral::{dot, norm_sq};

mod constants;
mod stats;

pub use constants::{estimate_lp_poincare, estimate_poincare, lp_poincare_constant, triangle_wave, ProofConstants};
pub use stats::{estimate_strong_order, estimate_sup_moment, ConvergenceReport, MomentEstimate};

/// Multiplicative slack on analytic constants.
pub const SLACK: f64 = 1.05;
pub const ABS_TOL: f64 = 1e-10;
const COERCIVITY_TOL: f64 = 1e-8;
const DUAL_RANDOM_DIRECTIONS: usize = 50;
const HEMI_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub seed: u64,
    pub probes: Vec<Probe>,
}

fn draw(form: &dyn WeakForm, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let b = form.basis();
    let mut c: Vec<f64> = (0..form.dim())
        .map(|j| {
            let z: f64 = StandardNormal.sample(rng);
            z / (1.0 + b.eigenvalue(j)).sqrt()
        })
        .collect();
    if form.mean_zero() {
        c[0] = 0.0;
    }
    c
}

impl ProbeSet {
    pub fn random(form: &dyn WeakForm, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probes = (0..n)
            .map(|_| {
                let t = rng.random_range(0.0..=form.horizon());
                let u = draw(form, &mut rng);
                let v = draw(form, &mut rng);
                let x = draw(form, &mut rng);
                Probe { t, u, v, x }
            })
            .collect();
        Self { seed, probes }
    }

    /// Add `w` as u, v and x of an extra probe at each of `times`.
    pub fn with_direction(mut self, w: &[f64], times: &[f64]) -> Self {
        for &t in times {
            let neg: Vec<f64> = w.iter().map(|x| -x).collect();
            self.probes.push(Probe { t, u: w.to_vec(), v: neg, x: w.to_vec() });
        }
        self
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    /// sup of the per-sample ratios (or max violation for coercivity)
    pub estimate: f64,
    pub bound: f64,
    pub passed: bool,
    pub ratios: Vec<f64>,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn sup(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// sup of 2⟨Au − Av, u − v⟩ / ‖u − v‖²_H (solution-independent noise adds nothing).
pub fn weak_monotonicity_ratios(form: &dyn WeakForm, probes: &ProbeSet) -> Result<Vec<f64>> {
    probes
        .probes
        .iter()
        .map(|p| {
            let d = sub(&p.u, &p.v);
            let n = norm_sq(&d);
            if n == 0.0 {
                return Ok(0.0);
            }
            let au = form.action(p.t, &p.u)?;
            let av = form.action(p.t, &p.v)?;
            Ok(2.0 * dot(&sub(&au, &av), &d) / n)
        })
        .collect()
}

pub fn check_weak_monotonicity(form: &dyn WeakForm, probes: &ProbeSet, c: f64) -> Result<CheckOutcome> {
    let ratios = weak_monotonicity_ratios(form, probes)?;
    let estimate = sup(&ratios);
    Ok(CheckOutcome { estimate, bound: c, passed: estimate <= c * SLACK + ABS_TOL, ratios })
}

/// Violation of 2⟨Av, v⟩ ≤ c₁‖v‖²_H − c₂‖v‖_V^α + f per sample, relative to
/// the magnitude of the terms. The reported estimate is the largest one.
pub fn check_coercivity(
    form: &dyn WeakForm,
    probes: &ProbeSet,
    c1: f64,
    c2: f64,
    alpha: f64,
    f: f64,
) -> Result<CheckOutcome> {
    let mut ratios = Vec::with_capacity(probes.len());
    for p in &probes.probes {
        let lhs = 2.0 * form.pairing(p.t, &p.u, &p.u)?;
        let h = norm_sq(&p.u);
        let vn = form.v_norm(&p.u).powf(alpha);
        let rhs = c1 * h - c2 * vn + f;
        let scale = 1.0 + lhs.abs() + c1 * h + c2 * vn + f;
        ratios.push((lhs - rhs) / scale);
    }
    let estimate = sup(&ratios);
    Ok(CheckOutcome { estimate, bound: COERCIVITY_TOL, passed: estimate <= COERCIVITY_TOL, ratios })
}

/// Probe estimate of ‖w‖_{V*} for the functional x ↦ ⟨w, x⟩_H: basis
/// directions, random directions, the H¹ Riesz maximizer and `extra`.
pub fn dual_norm(form: &dyn WeakForm, w: &[f64], extra: &[&[f64]], rng: &mut ChaCha8Rng) -> f64 {
    let n = form.dim();
    let b = form.basis();
    let start = usize::from(form.mean_zero());
    let mut best = 0.0f64;
    let mut probe = |x: &[f64]| {
        let vn = form.v_norm(x);
        if vn > 0.0 {
            best = best.max(dot(w, x).abs() / vn);
        }
    };
    let mut e = vec![0.0; n];
    for j in start..n {
        e[j] = 1.0;
        probe(&e);
        e[j] = 0.0;
    }
    for _ in 0..DUAL_RANDOM_DIRECTIONS {
        probe(&draw(form, rng));
    }
    let mut riesz: Vec<f64> = w.iter().enumerate().map(|(j, r)| r / (1.0 + b.eigenvalue(j))).collect();
    if form.mean_zero() {
        riesz[0] = 0.0;
    }
    probe(&riesz);
    for x in extra {
        probe(x);
    }
    best
}

/// sup ‖Av‖_{V*} / ‖v‖_V^{α−1}.
pub fn check_boundedness(form: &dyn WeakForm, probes: &ProbeSet, alpha: f64, c3: f64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(probes.seed ^ 0x5eed_d0a1);
    let mut ratios = Vec::with_capacity(probes.len());
    for p in &probes.probes {
        let vn = form.v_norm(&p.u);
        if vn == 0.0 {
            ratios.push(0.0);
            continue;
        }
        let a = form.action(p.t, &p.u)?;
        let d = dual_norm(form, &a, &[&p.u, &p.x], &mut rng);
        ratios.push(d / vn.powf(alpha - 1.0));
    }
    let estimate = sup(&ratios);
    Ok(CheckOutcome { estimate, bound: c3, passed: estimate <= c3 * SLACK + ABS_TOL, ratios })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HemicontinuityOutcome {
    /// max |successive difference| of λ ↦ ⟨A(u+λv), x⟩
    pub max_gap: f64,
    /// L·h with L the largest sampled slope (nonlinear forms)
    pub allowed_gap: f64,
    /// max deviation from the affine fit (linear forms)
    pub affine_deviation: f64,
    pub passed: bool,
    pub gaps: Vec<f64>,
}

fn lambda_grid(h: f64) -> Vec<f64> {
    let n = (2.0 / h).round() as usize;
    (0..=n).map(|i| -1.0 + i as f64 * h).collect()
}

pub fn check_hemicontinuity(form: &dyn WeakForm, probes: &ProbeSet) -> Result<HemicontinuityOutcome> {
    check_hemicontinuity_step(form, probes, HEMI_STEP)
}

pub fn check_hemicontinuity_step(form: &dyn WeakForm, probes: &ProbeSet, h: f64) -> Result<HemicontinuityOutcome> {
    let lams = lambda_grid(h);
    let eps = 0.05 * h;
    let shifted: Vec<f64> = lams.iter().flat_map(|l| [l - eps, l + eps]).collect();
    let linear = form.is_linear();
    let (mut max_gap, mut max_slope, mut affine_dev) = (0.0f64, 0.0f64, 0.0f64);
    let mut gaps = Vec::with_capacity(probes.len());
    for p in &probes.probes {
        let vals = form.pairing_line(p.t, &p.u, &p.v, &p.x, &lams)?;
        let gap = vals.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        gaps.push(gap);
        max_gap = max_gap.max(gap);
        if linear {
            let (a, b) = (vals[0], *vals.last().unwrap());
            let scale = 1.0 + vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (l, y) in lams.iter().zip(&vals) {
                let fit = a + (b - a) * (l + 1.0) / 2.0;
                affine_dev = affine_dev.max((y - fit).abs() / scale);
            }
        } else {
            let side = form.pairing_line(p.t, &p.u, &p.v, &p.x, &shifted)?;
            for w in side.chunks(2) {
                max_slope = max_slope.max((w[1] - w[0]).abs() / (2.0 * eps));
            }
        }
    }
    let allowed = max_slope * h * SLACK;
    let passed = if linear { affine_dev <= ABS_TOL } else { max_gap <= allowed + ABS_TOL };
    Ok(HemicontinuityOutcome { max_gap, allowed_gap: allowed, affine_deviation: affine_dev, passed, gaps })
}

/// One combined certification run against a set of analytic constants.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub label: String,
    pub seed: u64,
    pub samples: usize,
    pub constants: ProofConstants,
    pub hemicontinuity: HemicontinuityOutcome,
    pub monotonicity: CheckOutcome,
    pub coercivity: CheckOutcome,
    pub boundedness: CheckOutcome,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.hemicontinuity.passed && self.monotonicity.passed && self.coercivity.passed && self.boundedness.passed
    }

    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        let c = &self.constants;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("label", self.label.clone());
        kv("seed", self.seed.to_string());
        kv("samples", self.samples.to_string());
        kv("h1_max_gap", self.hemicontinuity.max_gap.to_string());
        kv("h1_allowed_gap", self.hemicontinuity.allowed_gap.to_string());
        kv("h1_affine_deviation", self.hemicontinuity.affine_deviation.to_string());
        kv("h1_pass", self.hemicontinuity.passed.to_string());
        kv("c_monotone", self.monotonicity.estimate.to_string());
        kv("c_bound", c.c.to_string());
        kv("h2_pass", self.monotonicity.passed.to_string());
        kv("c1", c.c1.to_string());
        kv("c2", c.c2.to_string());
        kv("alpha", c.alpha.to_string());
        kv("f", c.f.to_string());
        kv("coercivity_max_violation", self.coercivity.estimate.to_string());
        kv("h3_pass", self.coercivity.passed.to_string());
        kv("c3", self.boundedness.estimate.to_string());
        kv("c3_bound", c.c3.to_string());
        kv("g", c.g.to_string());
        kv("h4_pass", self.boundedness.passed.to_string());
        kv("pass", self.passed().to_string());
        s
    }

    /// CSV `sample,t,h1_gap,h2_ratio,h3_violation,h4_ratio`.
    pub fn ratios_csv(&self, probes: &ProbeSet) -> String {
        let mut s = String::from("sample,t,h1_gap,h2_ratio,h3_violation,h4_ratio\n");
        for (i, p) in probes.probes.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{},{},{},{},{}",
                p.t,
                self.hemicontinuity.gaps[i],
                self.monotonicity.ratios[i],
                self.coercivity.ratios[i],
                self.boundedness.ratios[i]
            );
        }
        s
    }
}

pub fn certify(form: &dyn WeakForm, constants: &ProofConstants, probes: &ProbeSet, label: &str) -> Result<HypothesisReport> {
    let c = constants;
    Ok(HypothesisReport {
        label: label.to_string(),
        seed: probes.seed,
        samples: probes.len(),
        constants: c.clone(),
        hemicontinuity: check_hemicontinuity(form, probes)?,
        monotonicity: check_weak_monotonicity(form, probes, c.c)?,
        coercivity: check_coercivity(form, probes, c.c1, c.c2, c.alpha, c.f)?,
        boundedness: check_boundedness(form, probes, c.alpha, c.c3)?,
    })
}

#[cfg(test)]
mod tests;
