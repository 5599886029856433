//! Isotropic metric families g(·,t) = factor(t)·g_unit on a reference manifold.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::gbm::GbmDriver;
use crate::geometry::manifold::{ManifoldKind, ReferenceManifold};
use crate::spectral::FourierBasis;

/// Time samples used for bound scans of smooth closed-form profiles.
const SCAN_SAMPLES: usize = 2000;
const TIME_EPS: f64 = 1e-12;

/// Radius of the unit sphere in ℝⁿ shrinking under mean curvature flow.
pub fn mcf_radius(t: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("ambient dimension {n} < 2")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("negative time {t}")));
    }
    let extinction = 1.0 / (2.0 * n as f64);
    if t >= extinction {
        return Err(Error::Domain(format!(
            "t = {t} >= 1/(2n) = {extinction}: the sphere has shrunk to a point"
        )));
    }
    Ok((1.0 - 2.0 * n as f64 * t).sqrt())
}

/// Piecewise-linear factor observations (t_k, f_k).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl FactorTable {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidParameter(
                "factor table needs at least two (t, f) rows of equal length".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("factor table times must increase strictly".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-positive factor value {v}")));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Linear interpolation; exact at the knots.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let (t0, t1) = (self.start(), self.end());
        if t < t0 - TIME_EPS || t > t1 + TIME_EPS {
            return Err(Error::OutsideHorizon { t, horizon: t1 });
        }
        let t = t.clamp(t0, t1);
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            return Ok(self.values[0]);
        }
        if idx >= self.times.len() {
            return Ok(*self.values.last().unwrap());
        }
        let (ta, tb) = (self.times[idx - 1], self.times[idx]);
        if t == ta {
            return Ok(self.values[idx - 1]);
        }
        let w = (t - ta) / (tb - ta);
        Ok(self.values[idx - 1] * (1.0 - w) + self.values[idx] * w)
    }

    /// CSV with header `t,f`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,f\n");
        for (t, f) in self.times.iter().zip(&self.values) {
            let _ = writeln!(s, "{t},{f}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (ln == 0 && line.starts_with('t')) {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |p: Option<&str>| -> Result<f64> {
                p.and_then(|s| s.trim().parse().ok()).ok_or_else(|| {
                    Error::InvalidParameter(format!("factor table line {}: '{line}'", ln + 1))
                })
            };
            times.push(parse(parts.next())?);
            values.push(parse(parts.next())?);
        }
        Self::new(times, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorProfile {
    Constant(f64),
    /// factor(t) = 1 − 2nt (sphere under mean curvature flow).
    Mcf { n: usize },
    Table(FactorTable),
    Gbm { driver: GbmDriver, table: FactorTable },
}

impl FactorProfile {
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            FactorProfile::Constant(c) => Ok(*c),
            FactorProfile::Mcf { n } => {
                let r = mcf_radius(t, *n)?;
                Ok(r * r)
            }
            FactorProfile::Table(tab) | FactorProfile::Gbm { table: tab, .. } => tab.eval(t),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, FactorProfile::Constant(_))
    }

    fn table(&self) -> Option<&FactorTable> {
        match self {
            FactorProfile::Table(t) | FactorProfile::Gbm { table: t, .. } => Some(t),
            _ => None,
        }
    }
}

/// g_ij(x,t) = factor(t)·g_ij(x,0) on the θ chart of the reference manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricFamily {
    base: ReferenceManifold,
    profile: FactorProfile,
    horizon: f64,
    samples: Vec<f64>,
    a1: f64,
    b1: f64,
}

pub fn build_metric_family(
    base: ReferenceManifold,
    profile: FactorProfile,
    horizon: f64,
) -> Result<MetricFamily> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    match &profile {
        FactorProfile::Constant(c) => {
            if !(*c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidParameter(format!("constant factor {c} must be positive")));
            }
        }
        FactorProfile::Mcf { n } => {
            if base.kind() != ManifoldKind::CircleUnit {
                return Err(Error::Unsupported("mean curvature flow needs an embedded sphere".into()));
            }
            let limit = 1.0 / (2.0 * *n as f64);
            if horizon >= limit {
                return Err(Error::Domain(format!(
                    "mcf horizon T = {horizon} violates T < 1/(2n) = {limit}"
                )));
            }
        }
        FactorProfile::Table(tab) | FactorProfile::Gbm { table: tab, .. } => {
            if tab.start().abs() > TIME_EPS || tab.end() < horizon - TIME_EPS {
                return Err(Error::InvalidParameter(format!(
                    "factor table covers [{}, {}], horizon {horizon}",
                    tab.start(),
                    tab.end()
                )));
            }
        }
    }
    let samples: Vec<f64> = match &profile {
        FactorProfile::Constant(_) => vec![0.0, horizon],
        FactorProfile::Mcf { .. } => (0..=SCAN_SAMPLES)
            .map(|i| horizon * i as f64 / SCAN_SAMPLES as f64)
            .collect(),
        _ => {
            let tab = profile.table().unwrap();
            let mut s: Vec<f64> = tab.times().iter().copied().filter(|&t| t < horizon).collect();
            s.push(horizon);
            s
        }
    };
    let mut a1 = f64::INFINITY;
    let mut b1 = 0.0f64;
    for &t in &samples {
        let f = profile.eval(t)?;
        if !(f > 0.0) {
            return Err(Error::InvalidParameter(format!("factor({t}) = {f} is not positive")));
        }
        // g(x,0) = 1 at every node of the θ chart, so √|g(x,t)| = √factor(t)
        let s = f.sqrt();
        a1 = a1.min(s);
        b1 = b1.max(s);
    }
    Ok(MetricFamily { base, profile, horizon, samples, a1, b1 })
}

impl MetricFamily {
    pub fn base(&self) -> &ReferenceManifold {
        &self.base
    }

    pub fn profile(&self) -> &FactorProfile {
        &self.profile
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_static(&self) -> bool {
        self.profile.is_static()
    }

    pub fn time_samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= -TIME_EPS && t <= self.horizon + TIME_EPS) {
            return Err(Error::OutsideHorizon { t, horizon: self.horizon });
        }
        Ok(())
    }

    pub fn factor(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        self.profile.eval(t.clamp(0.0, self.horizon))
    }

    pub fn reference_factor(&self) -> f64 {
        self.profile.eval(0.0).expect("profile defined at t = 0")
    }

    /// g_θθ(x,t)
    pub fn metric(&self, t: f64) -> Result<f64> {
        self.factor(t)
    }

    /// g^θθ(x,t)
    pub fn inverse_metric(&self, t: f64) -> Result<f64> {
        Ok(1.0 / self.factor(t)?)
    }

    /// √|g(x,t)| on the θ chart.
    pub fn sqrt_det(&self, t: f64) -> Result<f64> {
        Ok(self.factor(t)?.sqrt())
    }

    /// √|g(x,t)| / √|g(x,0)|, spatially constant for isotropic families.
    pub fn volume_ratio(&self, t: f64) -> Result<f64> {
        Ok((self.factor(t)? / self.reference_factor()).sqrt())
    }

    /// (a₁, b₁) with a₁ ≤ √|g| ≤ b₁ over grid × [0,T].
    pub fn determinant_bounds(&self) -> (f64, f64) {
        (self.a1, self.b1)
    }

    /// (a₃, b₃): range of g^θθ(x,t) relative to the coordinate gradient.
    pub fn inverse_metric_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &t in &self.samples {
            let g = 1.0 / self.profile.eval(t).expect("sampled in range");
            lo = lo.min(g);
            hi = hi.max(g);
        }
        (lo, hi)
    }

    /// ‖u‖²_{H_{g_t}} of reference coefficients.
    pub fn h_gt_norm_sq(&self, u: &[f64], t: f64) -> Result<f64> {
        Ok(self.volume_ratio(t)? * crate::spectral::norm_sq(u))
    }

    /// Fourier basis orthonormal for the reference metric g(·,0).
    pub fn basis(&self) -> Result<FourierBasis> {
        self.base.basis(self.reference_factor())
    }
}

/// Tight (a₂, b₂) with a₂‖u‖²_{H₀} ≤ ‖u‖²_{H_{g_t}} ≤ b₂‖u‖²_{H₀}.
pub fn norm_equivalence_constants(mf: &MetricFamily) -> (f64, f64) {
    let f0 = mf.reference_factor();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &t in mf.time_samples() {
        let r = (mf.profile.eval(t).expect("sampled in range") / f0).sqrt();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::gbm::{gbm_factor_path, GbmDriver};

    fn circle() -> ReferenceManifold {
        ReferenceManifold::circle(8).unwrap()
    }

    #[test]
    fn mcf_radius_examples() {
        assert_eq!(mcf_radius(0.0, 2).unwrap(), 1.0);
        assert!((mcf_radius(0.125, 2).unwrap() - 0.7071067811865476).abs() < 1e-16);
        assert!(matches!(mcf_radius(0.25, 2), Err(Error::Domain(_))));
        assert!(mcf_radius(0.1, 2).unwrap() > mcf_radius(0.2, 2).unwrap());
    }

    #[test]
    fn static_family_bounds() {
        let mf = build_metric_family(circle(), FactorProfile::Constant(1.0), 1.0).unwrap();
        assert_eq!(mf.determinant_bounds(), (1.0, 1.0));
        assert_eq!(norm_equivalence_constants(&mf), (1.0, 1.0));
    }

    #[test]
    fn mcf_family_bounds() {
        let mf = build_metric_family(circle(), FactorProfile::Mcf { n: 2 }, 0.2).unwrap();
        let (a1, b1) = mf.determinant_bounds();
        assert!((a1 - 0.2f64.sqrt()).abs() < 1e-12);
        assert!((b1 - 1.0).abs() < 1e-12);
        let (a2, b2) = norm_equivalence_constants(&mf);
        assert!((a2 - 0.4472135955).abs() < 1e-10);
        assert_eq!(b2, 1.0);
        for i in 0..=20 {
            let t = 0.2 * i as f64 / 20.0;
            let r = mcf_radius(t.min(0.2), 2).unwrap();
            assert!((mf.factor(t).unwrap() - r * r).abs() < 1e-14);
        }
        // ‖1‖²_{H_{g_t}} at t = 0.2 equals 2π√0.2 for the constant function 1
        let basis = mf.basis().unwrap();
        let one = basis.project_fn(|_| 1.0);
        let n = mf.h_gt_norm_sq(&one, 0.2).unwrap();
        assert!((n - 2.0 * std::f64::consts::PI * 0.2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mcf_horizon_rejected() {
        let e = build_metric_family(circle(), FactorProfile::Mcf { n: 2 }, 0.25).unwrap_err();
        assert!(e.to_string().contains("1/(2n)"));
        let torus = ReferenceManifold::new(ManifoldKind::FlatTorus1D, 2, 4, 17).unwrap();
        assert!(build_metric_family(torus, FactorProfile::Mcf { n: 2 }, 0.1).is_err());
    }

    #[test]
    fn non_positive_profiles_rejected() {
        assert!(build_metric_family(circle(), FactorProfile::Constant(0.0), 1.0).is_err());
        assert!(FactorTable::new(vec![0.0, 1.0], vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn deterministic_gbm_family() {
        let d = GbmDriver::new(-0.1, 0.0, 100, 7).unwrap();
        let tab = gbm_factor_path(&d, 1.0).unwrap();
        let mf = build_metric_family(circle(), FactorProfile::Gbm { driver: d, table: tab }, 1.0).unwrap();
        let (a1, b1) = mf.determinant_bounds();
        assert!((a1 - (-0.05f64).exp()).abs() < 1e-12);
        assert!((b1 - 1.0).abs() < 1e-15);
        assert!((mf.factor(0.5).unwrap() - (-0.05f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn gbm_norm_equivalence_matches_exhaustive_scan() {
        let d = GbmDriver::new(0.0, 0.2, 500, 42).unwrap();
        let tab = gbm_factor_path(&d, 1.0).unwrap();
        let lo = tab.values().iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
        let hi = tab.values().iter().cloned().fold(0.0, f64::max).sqrt();
        let mf = build_metric_family(circle(), FactorProfile::Gbm { driver: d, table: tab }, 1.0).unwrap();
        let (a2, b2) = norm_equivalence_constants(&mf);
        assert_eq!((a2, b2), (lo, hi));
    }

    #[test]
    fn table_interpolation_and_csv() {
        let tab = FactorTable::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(tab.eval(0.25).unwrap(), 1.5);
        assert_eq!(tab.eval(1.0).unwrap(), 4.0);
        assert!(tab.eval(1.5).is_err());
        let back = FactorTable::from_csv(&tab.to_csv()).unwrap();
        assert_eq!(back, tab);
    }
}
