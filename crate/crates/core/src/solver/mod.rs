//! Euler–Maruyama time stepping in the Galerkin coefficient space.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU, Dyn};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::MetricFamily;
use crate::noise::{NoiseModel, NoiseStream, WienerIncrement};
use crate::operators::{apply_nonlinearity, NonlinearitySpec, WeakForm};
use crate::spectral::norm_sq;

mod exact;
mod pushforward;

pub use exact::{adaptive_simpson, exact_linear_mode};
pub use pushforward::{pushforward_solution, SurfaceTrajectory};

const PIVOT_TOL: f64 = 1e-14;
const STABILITY_LIMIT: f64 = 0.5;
/// Cap on cached LU factors per plan; beyond it factors are rebuilt per step.
const MAX_CACHED_FACTORS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    SemiImplicit,
    ExplicitEm,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::SemiImplicit => "semi_implicit",
            Scheme::ExplicitEm => "explicit_em",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "semi_implicit" => Some(Scheme::SemiImplicit),
            "explicit_em" => Some(Scheme::ExplicitEm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub record_stride: usize,
    pub master_seed: u64,
}

impl SolverConfig {
    pub fn new(dt: f64, scheme: Scheme) -> Self {
        Self { dt, scheme, record_stride: 1, master_seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt {} must be positive", self.dt)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps to reach `horizon`; dt must divide it.
    pub fn steps_for(&self, horizon: f64) -> Result<usize> {
        self.validate()?;
        let n = (horizon / self.dt).round();
        if n < 1.0 || (n * self.dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::InvalidParameter(format!("dt {} does not divide T = {horizon}", self.dt)));
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub t: f64,
    pub coeffs: Vec<f64>,
}

impl SpectralState {
    pub fn new(t: f64, coeffs: Vec<f64>) -> Self {
        Self { t, coeffs }
    }

    pub fn h0_norm_sq(&self) -> f64 {
        norm_sq(&self.coeffs)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Zero,
    Heat,
    McfSphere { n: usize },
    MovingSurface,
    General,
    PLaplace,
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::Zero => "zero",
            OperatorKind::Heat => "heat",
            OperatorKind::McfSphere { .. } => "mcf_sphere",
            OperatorKind::MovingSurface => "moving_surface",
            OperatorKind::General => "general",
            OperatorKind::PLaplace => "plaplace",
        }
    }
}

/// Everything a path solve needs besides the step size and seed.
#[derive(Clone)]
pub struct Scenario {
    pub form: Arc<dyn WeakForm>,
    pub kind: OperatorKind,
    pub nl: NonlinearitySpec,
    pub noise: Option<NoiseModel>,
    pub metric: MetricFamily,
    pub initial: Vec<f64>,
    /// Canonical description of the inputs; hashed into the digest.
    pub label: String,
}

impl Scenario {
    pub fn horizon(&self) -> f64 {
        self.form.horizon()
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: self.initial.len() });
        }
        if let Some(nm) = &self.noise {
            nm.weights_for(self.dim())?;
        }
        self.nl.validate()?;
        if self.form.mean_zero() && self.initial[0].abs() > 1e-12 {
            return Err(Error::NotMeanZero(self.initial[0]));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.label.as_bytes());
        h.update(self.kind.name().as_bytes());
        h.update(format!("{:?}", self.nl).as_bytes());
        if let Some(nm) = &self.noise {
            for s in nm.sigma() {
                h.update(s.to_le_bytes());
            }
        }
        for c in &self.initial {
            h.update(c.to_le_bytes());
        }
        h.update(self.horizon().to_le_bytes());
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn without_noise(&self) -> Self {
        Self { noise: None, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub h0_norm_sq: Vec<f64>,
    pub hgt_norm_sq: Vec<f64>,
    /// max over every step, recorded or not
    pub sup_norm_sq: f64,
    pub seed: u64,
    pub replica: u64,
    pub dt: f64,
    pub scheme: Scheme,
    pub steps: usize,
    pub digest: String,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory records the initial state")
    }

    /// CSV `t,H0_norm_sq,Hgt_norm_sq,coeff_0..`.
    pub fn to_csv(&self) -> String {
        let dim = self.states.first().map_or(0, |s| s.len());
        let mut s = String::from("t,H0_norm_sq,Hgt_norm_sq");
        for j in 0..dim {
            let _ = write!(s, ",coeff_{j}");
        }
        s.push('\n');
        for k in 0..self.times.len() {
            let _ = write!(s, "{},{},{}", self.times[k], self.h0_norm_sq[k], self.hgt_norm_sq[k]);
            for c in &self.states[k] {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }

    pub fn metadata_json(&self) -> String {
        let v = serde_json::json!({
            "digest": self.digest,
            "seed": self.seed,
            "replica": self.replica,
            "dt": self.dt,
            "scheme": self.scheme.name(),
            "steps": self.steps,
            "records": self.times.len(),
            "sup_norm_sq": self.sup_norm_sq,
            "version": env!("CARGO_PKG_VERSION"),
        });
        serde_json::to_string_pretty(&v).expect("json serialization") + "\n"
    }
}

enum Factor {
    Diagonal(Vec<f64>),
    Dense(LU<f64, Dyn, Dyn>),
}

impl Factor {
    fn build(form: &dyn WeakForm, t: f64, dt: f64, step: usize) -> Result<Self> {
        if let Some(d) = form.diagonal(t)? {
            let mut inv = Vec::with_capacity(d.len());
            for x in d {
                let pivot = 1.0 - dt * x;
                if pivot.abs() < PIVOT_TOL {
                    return Err(Error::SingularStep { step, pivot });
                }
                inv.push(1.0 / pivot);
            }
            return Ok(Factor::Diagonal(inv));
        }
        let m = form
            .matrix(t)?
            .ok_or_else(|| Error::Unsupported("implicit step needs a linear operator".into()))?;
        let n = m.nrows();
        let sys = DMatrix::identity(n, n) - m * dt;
        let lu = sys.lu();
        let u = lu.u();
        let pivot = (0..n).map(|k| u[(k, k)]).fold(f64::INFINITY, |a, x| if x.abs() < a.abs() { x } else { a });
        if pivot.abs() < PIVOT_TOL {
            return Err(Error::SingularStep { step, pivot });
        }
        Ok(Factor::Dense(lu))
    }

    fn solve(&self, rhs: Vec<f64>) -> Vec<f64> {
        match self {
            Factor::Diagonal(inv) => rhs.iter().zip(inv).map(|(r, i)| r * i).collect(),
            Factor::Dense(lu) => {
                let x = lu.solve(&DVector::from_vec(rhs)).expect("factor checked nonsingular");
                x.iter().copied().collect()
            }
        }
    }
}

/// Precomputed implicit factors for one (form, dt, steps) combination, shared
/// read-only across replicas.
pub struct StepPlan {
    dt: f64,
    steps: usize,
    implicit: bool,
    factors: Vec<Arc<Factor>>,
}

impl StepPlan {
    pub fn new(form: &dyn WeakForm, cfg: &SolverConfig, steps: usize) -> Result<Self> {
        let implicit = cfg.scheme == Scheme::SemiImplicit && form.is_linear();
        let mut factors: Vec<Arc<Factor>> = Vec::new();
        if implicit && (steps <= MAX_CACHED_FACTORS || form.diagonal(0.0)?.is_some()) {
            let mut prev: Option<(Vec<f64>, Arc<Factor>)> = None;
            for k in 0..steps {
                let t1 = (k + 1) as f64 * cfg.dt;
                let key = match form.diagonal(t1)? {
                    Some(d) => d,
                    None => form.matrix(t1)?.map(|m| m.as_slice().to_vec()).unwrap_or_default(),
                };
                if let Some((pk, f)) = &prev {
                    if *pk == key {
                        factors.push(f.clone());
                        continue;
                    }
                }
                let f = Arc::new(Factor::build(form, t1, cfg.dt, k)?);
                factors.push(f.clone());
                prev = Some((key, f));
            }
        }
        Ok(Self { dt: cfg.dt, steps, implicit, factors })
    }

    fn factor(&self, form: &dyn WeakForm, k: usize) -> Result<Arc<Factor>> {
        match self.factors.get(k) {
            Some(f) => Ok(f.clone()),
            None => Ok(Arc::new(Factor::build(form, (k + 1) as f64 * self.dt, self.dt, k)?)),
        }
    }
}

fn explicit_guard(form: &dyn WeakForm, t: f64, dt: f64) -> Result<()> {
    let rate = match form.diagonal(t)? {
        Some(d) => d.iter().fold(0.0f64, |a, x| a.max(x.abs())),
        None => match form.matrix(t)? {
            // ∞-norm bounds the spectral radius
            Some(m) => (0..m.nrows()).map(|r| m.row(r).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max),
            None => return Ok(()),
        },
    };
    if dt * rate >= STABILITY_LIMIT {
        return Err(Error::Unstable { t, bound: dt * rate });
    }
    Ok(())
}

fn add_noise(rhs: &mut [f64], inc: Option<&WienerIncrement>) {
    if let Some(inc) = inc {
        for (r, x) in rhs.iter_mut().zip(&inc.xi) {
            *r += x;
        }
    }
}

/// One time step from `state.t` to `state.t + dt`.
pub fn step(
    state: &SpectralState,
    form: &dyn WeakForm,
    nl: &NonlinearitySpec,
    inc: Option<&WienerIncrement>,
    cfg: &SolverConfig,
) -> Result<SpectralState> {
    if let Some(inc) = inc {
        if (inc.dt - cfg.dt).abs() > 1e-12 * cfg.dt {
            return Err(Error::InvalidParameter(format!("increment dt {} != solver dt {}", inc.dt, cfg.dt)));
        }
    }
    let k = (state.t / cfg.dt).round() as usize;
    let t1 = state.t + cfg.dt;
    form.check_time(t1)?;
    let implicit = cfg.scheme == Scheme::SemiImplicit && form.is_linear();
    let factor = if implicit { Some(Factor::build(form, t1, cfg.dt, k)?) } else { None };
    advance(state, form, nl, inc, cfg, factor.as_ref())
}

fn advance(
    state: &SpectralState,
    form: &dyn WeakForm,
    nl: &NonlinearitySpec,
    inc: Option<&WienerIncrement>,
    cfg: &SolverConfig,
    factor: Option<&Factor>,
) -> Result<SpectralState> {
    let dt = cfg.dt;
    let v = &state.coeffs;
    let mut rhs = v.clone();
    if !nl.is_zero() {
        for (r, f) in rhs.iter_mut().zip(apply_nonlinearity(nl, form.basis(), v)) {
            *r -= dt * f;
        }
    }
    let coeffs = match factor {
        Some(f) => {
            add_noise(&mut rhs, inc);
            f.solve(rhs)
        }
        None => {
            if cfg.scheme == Scheme::ExplicitEm {
                explicit_guard(form, state.t, dt)?;
            }
            for (r, a) in rhs.iter_mut().zip(form.action(state.t, v)?) {
                *r += dt * a;
            }
            add_noise(&mut rhs, inc);
            rhs
        }
    };
    Ok(SpectralState { t: state.t + dt, coeffs })
}

/// Final state and running sup of a replica; no per-step recording.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub final_state: Vec<f64>,
    pub sup_norm_sq: f64,
}

fn integrate(
    sc: &Scenario,
    cfg: &SolverConfig,
    plan: &StepPlan,
    replica: u64,
    mut record: Option<&mut Trajectory>,
) -> Result<PathSummary> {
    let form = sc.form.as_ref();
    let stream = NoiseStream::new(cfg.master_seed, replica);
    let mut state = SpectralState::new(0.0, sc.initial.clone());
    let mut sup = state.h0_norm_sq();
    let mut inc = sc.noise.as_ref().map(|nm| WienerIncrement::zero(cfg.dt, nm.modes()));
    let sqrt_dt = cfg.dt.sqrt();
    for k in 0..plan.steps {
        if let (Some(nm), Some(inc)) = (&sc.noise, inc.as_mut()) {
            stream.normals_at(k as u64, &mut inc.xi);
            for (x, s) in inc.xi.iter_mut().zip(nm.sigma()) {
                *x *= sqrt_dt * s;
            }
        }
        let factor = if plan.implicit { Some(plan.factor(form, k)?) } else { None };
        state = advance(&state, form, &sc.nl, inc.as_ref(), cfg, factor.as_deref())?;
        // keep t on the grid rather than accumulating round-off
        state.t = (k + 1) as f64 * cfg.dt;
        if !state.is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
        let n = state.h0_norm_sq();
        sup = sup.max(n);
        if let Some(tr) = record.as_deref_mut() {
            if (k + 1) % cfg.record_stride == 0 || k + 1 == plan.steps {
                tr.times.push(state.t);
                tr.h0_norm_sq.push(n);
                tr.hgt_norm_sq.push(sc.metric.h_gt_norm_sq(&state.coeffs, state.t)?);
                tr.states.push(state.coeffs.clone());
            }
        }
    }
    Ok(PathSummary { final_state: state.coeffs, sup_norm_sq: sup })
}

pub fn build_plan(sc: &Scenario, cfg: &SolverConfig) -> Result<StepPlan> {
    sc.validate()?;
    let steps = cfg.steps_for(sc.horizon())?;
    StepPlan::new(sc.form.as_ref(), cfg, steps)
}

/// Integrate replica `replica` from the initial datum to T.
pub fn solve_path(sc: &Scenario, cfg: &SolverConfig, replica: u64) -> Result<Trajectory> {
    let plan = build_plan(sc, cfg)?;
    solve_path_with(sc, cfg, &plan, replica)
}

pub fn solve_path_with(sc: &Scenario, cfg: &SolverConfig, plan: &StepPlan, replica: u64) -> Result<Trajectory> {
    let n0 = norm_sq(&sc.initial);
    let mut tr = Trajectory {
        times: vec![0.0],
        states: vec![sc.initial.clone()],
        h0_norm_sq: vec![n0],
        hgt_norm_sq: vec![sc.metric.h_gt_norm_sq(&sc.initial, 0.0)?],
        sup_norm_sq: n0,
        seed: cfg.master_seed,
        replica,
        dt: cfg.dt,
        scheme: cfg.scheme,
        steps: plan.steps,
        digest: sc.digest(),
    };
    let summary = integrate(sc, cfg, plan, replica, Some(&mut tr))?;
    tr.sup_norm_sq = summary.sup_norm_sq;
    Ok(tr)
}

pub fn solve_summary(sc: &Scenario, cfg: &SolverConfig, plan: &StepPlan, replica: u64) -> Result<PathSummary> {
    integrate(sc, cfg, plan, replica, None)
}

/// Final states of one replica at several step sizes driven by the same
/// Brownian path: level `i` uses `ratios[i]` fine steps per coarse step.
/// Returns the fine-grid final state followed by one state per ratio.
pub fn solve_coupled(sc: &Scenario, fine: &SolverConfig, ratios: &[usize], replica: u64) -> Result<Vec<Vec<f64>>> {
    sc.validate()?;
    let fine_steps = fine.steps_for(sc.horizon())?;
    for &r in ratios {
        if r == 0 || fine_steps % r != 0 {
            return Err(Error::InvalidParameter(format!(
                "coarse ratio {r} does not divide {fine_steps} fine steps"
            )));
        }
    }
    let form = sc.form.as_ref();
    let cfgs: Vec<SolverConfig> =
        ratios.iter().map(|&r| SolverConfig { dt: fine.dt * r as f64, ..*fine }).collect();
    let fine_plan = StepPlan::new(form, fine, fine_steps)?;
    let plans: Vec<StepPlan> = cfgs
        .iter()
        .zip(ratios)
        .map(|(c, r)| StepPlan::new(form, c, fine_steps / r))
        .collect::<Result<_>>()?;
    let stream = NoiseStream::new(fine.master_seed, replica);
    let j = sc.noise.as_ref().map_or(0, |nm| nm.modes());
    let mut fine_state = SpectralState::new(0.0, sc.initial.clone());
    let mut coarse: Vec<SpectralState> = ratios.iter().map(|_| fine_state.clone()).collect();
    let mut acc: Vec<WienerIncrement> = cfgs.iter().map(|c| WienerIncrement::zero(c.dt, j)).collect();
    let mut inc = WienerIncrement::zero(fine.dt, j);
    for k in 0..fine_steps {
        if let Some(nm) = &sc.noise {
            inc = stream.increment_at(nm, fine.dt, k as u64)?;
            for a in acc.iter_mut() {
                for (x, y) in a.xi.iter_mut().zip(&inc.xi) {
                    *x += y;
                }
            }
        }
        let noise = sc.noise.as_ref().map(|_| &inc);
        let f = if fine_plan.implicit { Some(fine_plan.factor(form, k)?) } else { None };
        fine_state = advance(&fine_state, form, &sc.nl, noise, fine, f.as_deref())?;
        fine_state.t = (k + 1) as f64 * fine.dt;
        if !fine_state.is_finite() {
            return Err(Error::NonFinite { step: k + 1 });
        }
        for (i, &r) in ratios.iter().enumerate() {
            if (k + 1) % r != 0 {
                continue;
            }
            let m = (k + 1) / r - 1;
            let plan = &plans[i];
            let f = if plan.implicit { Some(plan.factor(form, m)?) } else { None };
            let noise = sc.noise.as_ref().map(|_| &acc[i]);
            let mut next = advance(&coarse[i], form, &sc.nl, noise, &cfgs[i], f.as_deref())?;
            next.t = (m + 1) as f64 * cfgs[i].dt;
            if !next.is_finite() {
                return Err(Error::NonFinite { step: m + 1 });
            }
            coarse[i] = next;
            acc[i].xi.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    let mut out = vec![fine_state.coeffs];
    out.extend(coarse.into_iter().map(|s| s.coeffs));
    Ok(out)
}
