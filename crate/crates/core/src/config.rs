//! Scenario configuration files.
//!
//! Sectioned TOML, walked by hand so that every problem is reported at once
//! and unknown keys are errors. `ScenarioConfig::to_toml` writes every field
//! explicitly, so parse → serialize → parse is the identity.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::geometry::{
    build_metric_family, gbm_factor_path, FactorProfile, FactorTable, GbmDriver, ManifoldKind, MetricFamily,
    PullbackMap, ReferenceManifold,
};
use crate::noise::{canonical_embedding, NoiseModel};
use crate::operators::{
    GeneralParabolicForm, McfSphereForm, MovingSurfaceForm, NonlinearitySpec, PLaplaceForm, ParabolicCoefficients,
    VhField, WeakForm, WithNonlinearity,
};
use crate::solver::{OperatorKind, Scenario, Scheme, SolverConfig};
use crate::verify::ProofConstants;

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldConfig {
    pub kind: ManifoldKind,
    pub ambient_n: usize,
    pub modes: usize,
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricConfig {
    Static { factor: f64 },
    Mcf,
    Gbm(GbmDriver),
    /// CSV `t,f`, relative to the config file's directory
    Table { path: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorConfig {
    Heat,
    McfSphere,
    MovingSurface { vh: VhField, vh_bound: Option<f64> },
    General(ParabolicCoefficients),
    PLaplace { p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseConfig {
    None,
    Canonical { modes: usize },
    Custom { sigma: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialConfig {
    Zero,
    Mode { index: usize, amplitude: f64 },
    Coefficients(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    pub horizon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub record_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySection {
    pub samples: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSection {
    pub reference_dt: f64,
    pub dts: Vec<f64>,
    pub replicas: usize,
    pub min_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub dir: String,
    /// number of replicas whose full trajectory is written
    pub trajectories: usize,
    pub increments: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub manifold: ManifoldConfig,
    pub metric: MetricConfig,
    pub operator: OperatorConfig,
    pub nonlinearity: NonlinearitySpec,
    pub noise: NoiseConfig,
    pub initial: InitialConfig,
    pub solver: SolverSection,
    pub run: RunSection,
    pub verify: VerifySection,
    pub convergence: ConvergenceSection,
    pub output: OutputSection,
}

/// Pulls typed keys out of one section, recording every problem.
struct Section<'a> {
    name: &'static str,
    table: Table,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn new(root: &mut Table, name: &'static str, errors: &'a mut Vec<String>) -> Self {
        let table = match root.remove(name) {
            Some(Value::Table(t)) => t,
            Some(_) => {
                errors.push(format!("[{name}] must be a table"));
                Table::new()
            }
            None => Table::new(),
        };
        Self { name, table, errors }
    }

    fn err(&mut self, msg: impl std::fmt::Display) {
        self.errors.push(format!("[{}] {msg}", self.name));
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.table.remove(key)
    }

    fn f64_opt(&mut self, key: &str) -> Option<f64> {
        match self.take(key)? {
            Value::Float(x) => Some(x),
            Value::Integer(i) => Some(i as f64),
            v => {
                self.err(format!("{key} must be a number, got {v}"));
                None
            }
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        let x = self.f64_opt(key).unwrap_or(default);
        if !x.is_finite() {
            self.err(format!("{key} must be finite"));
        }
        x
    }

    fn u64_opt(&mut self, key: &str) -> Option<u64> {
        match self.take(key)? {
            Value::Integer(i) if i >= 0 => Some(i as u64),
            v => {
                self.err(format!("{key} must be a non-negative integer, got {v}"));
                None
            }
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        self.u64_opt(key).map_or(default, |x| x as usize)
    }

    fn str(&mut self, key: &str, default: &str) -> String {
        match self.take(key) {
            None => default.to_string(),
            Some(Value::String(s)) => s,
            Some(v) => {
                self.err(format!("{key} must be a string, got {v}"));
                default.to_string()
            }
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> bool {
        match self.take(key) {
            None => default,
            Some(Value::Boolean(b)) => b,
            Some(v) => {
                self.err(format!("{key} must be true or false, got {v}"));
                default
            }
        }
    }

    fn f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.take(key)?;
        let Value::Array(items) = v else {
            self.err(format!("{key} must be an array of numbers"));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for it in items {
            match it {
                Value::Float(x) if x.is_finite() => out.push(x),
                Value::Integer(i) => out.push(i as f64),
                other => {
                    self.err(format!("{key} has a non-numeric or non-finite entry {other}"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn u64_list(&mut self, key: &str) -> Option<Vec<u64>> {
        let v = self.take(key)?;
        let Value::Array(items) = v else {
            self.err(format!("{key} must be an array of integers"));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for it in items {
            match it {
                Value::Integer(i) if i >= 0 => out.push(i as u64),
                other => {
                    self.err(format!("{key} has an entry {other} that is not a non-negative integer"));
                    return None;
                }
            }
        }
        Some(out)
    }

    /// Reject whatever was not consumed.
    fn finish(self) {
        let mut keys: Vec<_> = self.table.keys().cloned().collect();
        keys.sort();
        for k in keys {
            self.errors.push(format!("[{}] unknown key '{k}'", self.name));
        }
    }
}

const SECTIONS: [&str; 11] =
    ["manifold", "metric", "operator", "nonlinearity", "noise", "initial", "solver", "run", "verify", "convergence", "output"];

/// Parse and validate; on failure every error found is returned.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string().trim().to_string()]))?;
    let mut errors = Vec::new();
    let mut unknown: Vec<String> = root.keys().filter(|k| !SECTIONS.contains(&k.as_str())).cloned().collect();
    unknown.sort();
    for k in unknown {
        errors.push(format!("unknown section or key '{k}'"));
    }

    let manifold = {
        let mut s = Section::new(&mut root, "manifold", &mut errors);
        let kind = match s.str("kind", "circle").as_str() {
            "circle" => ManifoldKind::CircleUnit,
            "torus" => ManifoldKind::FlatTorus1D,
            other => {
                s.err(format!("kind must be circle or torus, got '{other}'"));
                ManifoldKind::CircleUnit
            }
        };
        let ambient_n = s.usize("ambient_n", 2);
        let modes = s.usize("modes", 8);
        let grid = s.usize("grid", 8 * modes + 1);
        if ambient_n < 2 {
            s.err(format!("ambient_n must be >= 2, got {ambient_n}"));
        }
        if !(1..=4096).contains(&modes) {
            s.err(format!("modes must be in 1..=4096, got {modes}"));
        }
        if grid < 4 * modes + 1 {
            s.err(format!("grid must be >= 4*modes+1 = {}, got {grid}", 4 * modes + 1));
        }
        s.finish();
        ManifoldConfig { kind, ambient_n, modes, grid }
    };
    let dim = 2 * manifold.modes + 1;

    let solver = {
        let mut s = Section::new(&mut root, "solver", &mut errors);
        let horizon = s.f64("horizon", 1.0);
        let dt = s.f64("dt", DEFAULT_DT);
        let scheme_s = s.str("scheme", Scheme::SemiImplicit.name());
        let scheme = Scheme::parse(&scheme_s).unwrap_or_else(|| {
            s.err(format!("scheme must be semi_implicit or explicit_em, got '{scheme_s}'"));
            Scheme::SemiImplicit
        });
        let record_stride = s.usize("record_stride", 1);
        if !(horizon > 0.0) {
            s.err(format!("horizon must be positive, got {horizon}"));
        }
        if !(dt > 0.0) {
            s.err(format!("dt must be positive, got {dt}"));
        } else if horizon > 0.0 {
            if let Err(e) = SolverConfig::new(dt, scheme).steps_for(horizon) {
                s.err(e);
            }
        }
        if record_stride < 1 {
            s.err("record_stride must be >= 1");
        }
        s.finish();
        SolverSection { horizon, dt, scheme, record_stride }
    };

    let metric = {
        let mut s = Section::new(&mut root, "metric", &mut errors);
        let kind = s.str("kind", "static");
        let m = match kind.as_str() {
            "static" => {
                let factor = s.f64("factor", 1.0);
                if !(factor > 0.0) {
                    s.err(format!("factor must be positive, got {factor}"));
                }
                MetricConfig::Static { factor }
            }
            "mcf" => {
                let n = manifold.ambient_n as f64;
                if manifold.kind != ManifoldKind::CircleUnit {
                    s.err("mcf needs the circle manifold");
                }
                if solver.horizon >= 1.0 / (2.0 * n) {
                    s.err(format!(
                        "mcf requires T < 1/(2n) = {}, got T = {} (T < {} violated)",
                        1.0 / (2.0 * n),
                        solver.horizon,
                        1.0 / (2.0 * n)
                    ));
                }
                MetricConfig::Mcf
            }
            "gbm" => {
                let d = GbmDriver {
                    r: s.f64("r", -0.1),
                    sigma: s.f64("sigma", 0.2),
                    steps: s.usize("steps", 1000),
                    seed: s.u64_opt("seed").unwrap_or(0),
                };
                if let Err(e) = d.validate() {
                    s.err(e);
                }
                MetricConfig::Gbm(d)
            }
            "table" => {
                let path = s.str("path", "");
                if path.is_empty() {
                    s.err("table metric needs a path");
                }
                MetricConfig::Table { path }
            }
            other => {
                s.err(format!("kind must be static, mcf, gbm or table, got '{other}'"));
                MetricConfig::Static { factor: 1.0 }
            }
        };
        s.finish();
        m
    };

    let operator = {
        let mut s = Section::new(&mut root, "operator", &mut errors);
        let kind = s.str("kind", "heat");
        let op = match kind.as_str() {
            "heat" => OperatorConfig::Heat,
            "mcf_sphere" => {
                if metric != MetricConfig::Mcf {
                    s.err("mcf_sphere needs the mcf metric");
                }
                OperatorConfig::McfSphere
            }
            "moving_surface" => {
                let vh_kind = s.str("vh", "zero");
                let vh = match vh_kind.as_str() {
                    "zero" => VhField::Zero,
                    "constant" => VhField::Constant(s.f64("vh_mean", 0.0)),
                    "mcf" => {
                        if metric != MetricConfig::Mcf {
                            s.err("vh = mcf needs the mcf metric");
                        }
                        VhField::Mcf { n: manifold.ambient_n }
                    }
                    "cosine" => VhField::Cosine { mean: s.f64("vh_mean", 0.0), amp: s.f64("vh_amp", 0.0) },
                    other => {
                        s.err(format!("vh must be zero, constant, mcf or cosine, got '{other}'"));
                        VhField::Zero
                    }
                };
                let vh_bound = s.f64_opt("vh_bound");
                if let Some(k) = vh_bound {
                    if !(k >= 0.0) || !k.is_finite() {
                        s.err(format!("vh_bound must be a non-negative number, got {k}"));
                    }
                }
                OperatorConfig::MovingSurface { vh, vh_bound }
            }
            "general" => {
                let c = ParabolicCoefficients {
                    a_mean: s.f64("a_mean", 1.0),
                    a_cos: s.f64("a_cos", 0.0),
                    b: s.f64("b", 0.0),
                    b_cos: s.f64("b_cos", 0.0),
                    c_mean: s.f64("c_mean", 0.0),
                    c_cos: s.f64("c_cos", 0.0),
                };
                let (lo, _) = c.a_bounds();
                if !(lo > 0.0) {
                    s.err(format!("a_mean - |a_cos| must be positive, got {lo}"));
                }
                if c.b_cos != 0.0 {
                    s.err("b_cos must be 0: div b <= 0 on a closed curve forces a constant advection field");
                }
                OperatorConfig::General(c)
            }
            "plaplace" => {
                let p = s.f64("p", 4.0);
                if !(p > 2.0) {
                    s.err(format!("p must be > 2, got {p}"));
                }
                if !matches!(metric, MetricConfig::Static { .. }) {
                    s.err("plaplace needs a static metric");
                }
                OperatorConfig::PLaplace { p }
            }
            other => {
                s.err(format!("kind must be heat, mcf_sphere, moving_surface, general or plaplace, got '{other}'"));
                OperatorConfig::Heat
            }
        };
        s.finish();
        op
    };

    let nonlinearity = {
        let mut s = Section::new(&mut root, "nonlinearity", &mut errors);
        let kind = s.str("kind", "none");
        let nl = match kind.as_str() {
            "none" => NonlinearitySpec::Zero,
            "linear" => NonlinearitySpec::Linear(s.f64("gamma", 1.0)),
            "tanh" => NonlinearitySpec::Tanh(s.f64("gamma", 1.0)),
            other => {
                s.err(format!("kind must be none, linear or tanh, got '{other}'"));
                NonlinearitySpec::Zero
            }
        };
        if let Err(e) = nl.validate() {
            s.err(e);
        }
        if !nl.is_zero() && matches!(operator, OperatorConfig::PLaplace { .. }) {
            s.err("plaplace requires nonlinearity none");
        }
        s.finish();
        nl
    };

    let noise = {
        let mut s = Section::new(&mut root, "noise", &mut errors);
        let kind = s.str("kind", "canonical");
        let n = match kind.as_str() {
            "none" => NoiseConfig::None,
            "canonical" => {
                let modes = s.usize("modes", dim);
                if !(1..=dim).contains(&modes) {
                    s.err(format!("modes must be in 1..={dim} (basis dimension), got {modes}"));
                }
                NoiseConfig::Canonical { modes }
            }
            "custom" => {
                let sigma = s.f64_list("sigma").unwrap_or_default();
                if sigma.is_empty() || sigma.len() > dim {
                    s.err(format!("sigma needs 1..={dim} entries, got {}", sigma.len()));
                }
                if sigma.iter().any(|x| *x < 0.0) {
                    s.err("sigma entries must be non-negative");
                }
                NoiseConfig::Custom { sigma }
            }
            other => {
                s.err(format!("kind must be canonical, custom or none, got '{other}'"));
                NoiseConfig::None
            }
        };
        s.finish();
        n
    };

    let initial = {
        let mut s = Section::new(&mut root, "initial", &mut errors);
        let kind = s.str("kind", "mode");
        let mean_zero = matches!(operator, OperatorConfig::PLaplace { .. });
        let init = match kind.as_str() {
            "zero" => InitialConfig::Zero,
            "mode" => {
                let index = s.usize("index", 1);
                let amplitude = s.f64("amplitude", 1.0);
                if index >= dim {
                    s.err(format!("index must be < {dim}, got {index}"));
                }
                if mean_zero && index == 0 && amplitude != 0.0 {
                    s.err("plaplace requires mean-zero initial data (index 0 is the constant)");
                }
                InitialConfig::Mode { index, amplitude }
            }
            "coefficients" => {
                let c = s.f64_list("values").unwrap_or_default();
                if c.len() != dim {
                    s.err(format!("values needs {dim} entries, got {}", c.len()));
                }
                if mean_zero && c.first().is_some_and(|x| *x != 0.0) {
                    s.err("plaplace requires mean-zero initial data (values[0] = 0)");
                }
                InitialConfig::Coefficients(c)
            }
            other => {
                s.err(format!("kind must be zero, mode or coefficients, got '{other}'"));
                InitialConfig::Zero
            }
        };
        s.finish();
        init
    };

    let run = {
        let mut s = Section::new(&mut root, "run", &mut errors);
        let replicas = s.usize("replicas", 1);
        let seed = s.u64_opt("seed").unwrap_or(0);
        if replicas < 1 {
            s.err("replicas must be >= 1");
        }
        s.finish();
        RunSection { replicas, seed }
    };

    let verify = {
        let mut s = Section::new(&mut root, "verify", &mut errors);
        let samples = s.usize("samples", 500);
        let seeds = s.u64_list("seeds").unwrap_or_else(|| vec![1, 2]);
        if samples < 1 {
            s.err("samples must be >= 1");
        }
        if seeds.is_empty() {
            s.err("seeds must not be empty");
        }
        s.finish();
        VerifySection { samples, seeds }
    };

    let convergence = {
        let mut s = Section::new(&mut root, "convergence", &mut errors);
        let reference_dt = s.f64("reference_dt", 1e-5);
        let dts = s.f64_list("dts").unwrap_or_else(|| vec![1e-3, 5e-4, 2.5e-4]);
        let replicas = s.usize("replicas", 200);
        let min_slope = s.f64("min_slope", 0.8);
        if !(reference_dt > 0.0) {
            s.err(format!("reference_dt must be positive, got {reference_dt}"));
        }
        if dts.len() < 2 || dts.iter().any(|d| !(*d > reference_dt)) {
            s.err("dts needs at least two steps, all larger than reference_dt");
        }
        if replicas < 1 {
            s.err("replicas must be >= 1");
        }
        s.finish();
        ConvergenceSection { reference_dt, dts, replicas, min_slope }
    };

    let output = {
        let mut s = Section::new(&mut root, "output", &mut errors);
        let dir = s.str("dir", "out");
        let trajectories = s.usize("trajectories", 8);
        let increments = s.bool("increments", false);
        if dir.is_empty() {
            s.err("dir must not be empty");
        }
        s.finish();
        OutputSection { dir, trajectories, increments }
    };

    if errors.is_empty() {
        Ok(ScenarioConfig { manifold, metric, operator, nonlinearity, noise, initial, solver, run, verify, convergence, output })
    } else {
        Err(Error::Config(errors))
    }
}

fn fmt_f(x: f64) -> String {
    // Debug prints the shortest string that reparses to the same f64
    format!("{x:?}")
}

fn fmt_list<T>(xs: &[T], f: impl Fn(&T) -> String) -> String {
    format!("[{}]", xs.iter().map(f).collect::<Vec<_>>().join(", "))
}

fn quote(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

/// A scenario together with the analytic constants and the drift that the
/// hypothesis checks should see.
pub struct BuiltScenario {
    pub scenario: Scenario,
    pub constants: ProofConstants,
    /// A − φ, the drift including any nonlinearity
    pub drift: Arc<dyn WeakForm>,
}

impl ScenarioConfig {
    pub fn dim(&self) -> usize {
        2 * self.manifold.modes + 1
    }

    /// The parts that determine the stochastic problem itself.
    pub fn scenario_toml(&self) -> String {
        let mut s = String::new();
        let m = &self.manifold;
        let kind = match m.kind {
            ManifoldKind::CircleUnit => "circle",
            ManifoldKind::FlatTorus1D => "torus",
        };
        let _ = writeln!(s, "[manifold]\nkind = \"{kind}\"\nambient_n = {}\nmodes = {}\ngrid = {}\n", m.ambient_n, m.modes, m.grid);
        s.push_str("[metric]\n");
        match &self.metric {
            MetricConfig::Static { factor } => {
                let _ = writeln!(s, "kind = \"static\"\nfactor = {}", fmt_f(*factor));
            }
            MetricConfig::Mcf => s.push_str("kind = \"mcf\"\n"),
            MetricConfig::Gbm(d) => {
                let _ = writeln!(
                    s,
                    "kind = \"gbm\"\nr = {}\nsigma = {}\nsteps = {}\nseed = {}",
                    fmt_f(d.r),
                    fmt_f(d.sigma),
                    d.steps,
                    d.seed
                );
            }
            MetricConfig::Table { path } => {
                let _ = writeln!(s, "kind = \"table\"\npath = {}", quote(path));
            }
        }
        s.push_str("\n[operator]\n");
        match &self.operator {
            OperatorConfig::Heat => s.push_str("kind = \"heat\"\n"),
            OperatorConfig::McfSphere => s.push_str("kind = \"mcf_sphere\"\n"),
            OperatorConfig::MovingSurface { vh, vh_bound } => {
                s.push_str("kind = \"moving_surface\"\n");
                match vh {
                    VhField::Zero => s.push_str("vh = \"zero\"\n"),
                    VhField::Constant(c) => {
                        let _ = writeln!(s, "vh = \"constant\"\nvh_mean = {}", fmt_f(*c));
                    }
                    VhField::Mcf { .. } => s.push_str("vh = \"mcf\"\n"),
                    VhField::Cosine { mean, amp } => {
                        let _ = writeln!(s, "vh = \"cosine\"\nvh_mean = {}\nvh_amp = {}", fmt_f(*mean), fmt_f(*amp));
                    }
                }
                if let Some(k) = vh_bound {
                    let _ = writeln!(s, "vh_bound = {}", fmt_f(*k));
                }
            }
            OperatorConfig::General(c) => {
                let _ = writeln!(
                    s,
                    "kind = \"general\"\na_mean = {}\na_cos = {}\nb = {}\nb_cos = {}\nc_mean = {}\nc_cos = {}",
                    fmt_f(c.a_mean),
                    fmt_f(c.a_cos),
                    fmt_f(c.b),
                    fmt_f(c.b_cos),
                    fmt_f(c.c_mean),
                    fmt_f(c.c_cos)
                );
            }
            OperatorConfig::PLaplace { p } => {
                let _ = writeln!(s, "kind = \"plaplace\"\np = {}", fmt_f(*p));
            }
        }
        s.push_str("\n[nonlinearity]\n");
        match self.nonlinearity {
            NonlinearitySpec::Zero => s.push_str("kind = \"none\"\n"),
            NonlinearitySpec::Linear(g) => {
                let _ = writeln!(s, "kind = \"linear\"\ngamma = {}", fmt_f(g));
            }
            NonlinearitySpec::Tanh(g) => {
                let _ = writeln!(s, "kind = \"tanh\"\ngamma = {}", fmt_f(g));
            }
        }
        s.push_str("\n[noise]\n");
        match &self.noise {
            NoiseConfig::None => s.push_str("kind = \"none\"\n"),
            NoiseConfig::Canonical { modes } => {
                let _ = writeln!(s, "kind = \"canonical\"\nmodes = {modes}");
            }
            NoiseConfig::Custom { sigma } => {
                let _ = writeln!(s, "kind = \"custom\"\nsigma = {}", fmt_list(sigma, |x| fmt_f(*x)));
            }
        }
        s.push_str("\n[initial]\n");
        match &self.initial {
            InitialConfig::Zero => s.push_str("kind = \"zero\"\n"),
            InitialConfig::Mode { index, amplitude } => {
                let _ = writeln!(s, "kind = \"mode\"\nindex = {index}\namplitude = {}", fmt_f(*amplitude));
            }
            InitialConfig::Coefficients(c) => {
                let _ = writeln!(s, "kind = \"coefficients\"\nvalues = {}", fmt_list(c, |x| fmt_f(*x)));
            }
        }
        let v = &self.solver;
        let _ = writeln!(
            s,
            "\n[solver]\nhorizon = {}\ndt = {}\nscheme = \"{}\"\nrecord_stride = {}",
            fmt_f(v.horizon),
            fmt_f(v.dt),
            v.scheme.name(),
            v.record_stride
        );
        s
    }

    /// Canonical text with every field explicit.
    pub fn to_toml(&self) -> String {
        let mut s = self.scenario_toml();
        let _ = writeln!(s, "\n[run]\nreplicas = {}\nseed = {}", self.run.replicas, self.run.seed);
        let _ = writeln!(
            s,
            "\n[verify]\nsamples = {}\nseeds = {}",
            self.verify.samples,
            fmt_list(&self.verify.seeds, |x| x.to_string())
        );
        let c = &self.convergence;
        let _ = writeln!(
            s,
            "\n[convergence]\nreference_dt = {}\ndts = {}\nreplicas = {}\nmin_slope = {}",
            fmt_f(c.reference_dt),
            fmt_list(&c.dts, |x| fmt_f(*x)),
            c.replicas,
            fmt_f(c.min_slope)
        );
        let o = &self.output;
        let _ = writeln!(
            s,
            "\n[output]\ndir = {}\ntrajectories = {}\nincrements = {}",
            quote(&o.dir),
            o.trajectories,
            o.increments
        );
        s
    }

    pub fn digest(&self) -> String {
        hex_digest(self.to_toml().as_bytes())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            dt: self.solver.dt,
            scheme: self.solver.scheme,
            record_stride: self.solver.record_stride,
            master_seed: self.run.seed,
        }
    }

    pub fn noise_model(&self) -> Result<Option<NoiseModel>> {
        Ok(match &self.noise {
            NoiseConfig::None => None,
            NoiseConfig::Canonical { modes } => Some(canonical_embedding(*modes)?),
            NoiseConfig::Custom { sigma } => Some(NoiseModel::new(sigma.clone())?),
        })
    }

    /// Metric family; table paths are resolved against `base_dir`.
    pub fn metric_family(&self, base_dir: &Path) -> Result<MetricFamily> {
        let m = &self.manifold;
        let base = ReferenceManifold::new(m.kind, m.ambient_n, m.modes, m.grid)?;
        let t = self.solver.horizon;
        let profile = match &self.metric {
            MetricConfig::Static { factor } => FactorProfile::Constant(*factor),
            MetricConfig::Mcf => FactorProfile::Mcf { n: m.ambient_n },
            MetricConfig::Gbm(d) => FactorProfile::Gbm { driver: *d, table: gbm_factor_path(d, t)? },
            MetricConfig::Table { path } => {
                let text = std::fs::read_to_string(base_dir.join(path))?;
                FactorProfile::Table(FactorTable::from_csv(&text)?)
            }
        };
        build_metric_family(base, profile, t)
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let dim = self.dim();
        match &self.initial {
            InitialConfig::Zero => vec![0.0; dim],
            InitialConfig::Mode { index, amplitude } => {
                let mut c = vec![0.0; dim];
                c[*index] = *amplitude;
                c
            }
            InitialConfig::Coefficients(c) => c.clone(),
        }
    }

    pub fn build(&self, base_dir: &Path) -> Result<BuiltScenario> {
        let metric = self.metric_family(base_dir)?;
        let noise = self.noise_model()?;
        let nm = noise.as_ref();
        let horizon = self.solver.horizon;
        let (form, kind, constants): (Arc<dyn WeakForm>, OperatorKind, ProofConstants) = match &self.operator {
            OperatorConfig::Heat => {
                let f = MovingSurfaceForm::new(metric.clone(), VhField::Zero, Some(0.0))?;
                let pc = if metric.is_static() {
                    ProofConstants::heat_static(nm)
                } else {
                    ProofConstants::moving_surface(&f, nm)
                };
                (Arc::new(f), OperatorKind::Heat, pc)
            }
            OperatorConfig::McfSphere => {
                let n = self.manifold.ambient_n;
                let f = McfSphereForm::new(n, metric.basis()?, horizon)?;
                (Arc::new(f), OperatorKind::McfSphere { n }, ProofConstants::mcf_sphere(n, horizon, nm)?)
            }
            OperatorConfig::MovingSurface { vh, vh_bound } => {
                let f = MovingSurfaceForm::new(metric.clone(), *vh, *vh_bound)?;
                let pc = ProofConstants::moving_surface(&f, nm);
                (Arc::new(f), OperatorKind::MovingSurface, pc)
            }
            OperatorConfig::General(c) => {
                let f = GeneralParabolicForm::new(*c, PullbackMap::new(metric.clone()))?;
                let pc = ProofConstants::general_parabolic(&f, nm);
                (Arc::new(f), OperatorKind::General, pc)
            }
            OperatorConfig::PLaplace { p } => {
                let f = PLaplaceForm::new(&metric, *p)?;
                let pc = ProofConstants::p_laplace(&f, nm);
                (Arc::new(f), OperatorKind::PLaplace, pc)
            }
        };
        let nl = self.nonlinearity;
        let constants = constants.with_nonlinearity(&nl, &metric);
        let drift: Arc<dyn WeakForm> =
            if nl.is_zero() { form.clone() } else { Arc::new(WithNonlinearity::new(form.clone(), nl)?) };
        let scenario = Scenario {
            form,
            kind,
            nl,
            noise,
            metric,
            initial: self.initial_state(),
            label: self.scenario_toml(),
        };
        scenario.validate()?;
        Ok(BuiltScenario { scenario, constants, drift })
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[manifold]\nmodes = 4\n";

    fn errors(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.solver.dt, 1e-3);
        assert_eq!(c.noise, NoiseConfig::Canonical { modes: 9 });
        assert_eq!(c.run.replicas, 1);
        assert_eq!(c.operator, OperatorConfig::Heat);
        assert_eq!(c.metric, MetricConfig::Static { factor: 1.0 });
        let b = c.build(Path::new(".")).unwrap();
        assert_eq!(b.scenario.dim(), 9);
        assert_eq!(b.constants.c1, 2.0);
    }

    #[test]
    fn mcf_horizon_error_quotes_constraint() {
        let e = errors("[manifold]\nambient_n = 2\n[metric]\nkind = \"mcf\"\n[solver]\nhorizon = 0.3\n");
        assert_eq!(e.len(), 1);
        assert!(e[0].contains("T < 0.25"), "{e:?}");
    }

    #[test]
    fn gbm_drift_error_quotes_constraint() {
        let e = errors("[metric]\nkind = \"gbm\"\nr = 0.05\nsigma = 0.2\n");
        assert!(e.iter().any(|m| m.contains("r - sigma^2/2 < 0")), "{e:?}");
    }

    #[test]
    fn all_errors_are_collected() {
        let e = errors(
            "[manifold]\nmodes = 0\ncolour = \"red\"\n[solver]\ndt = -1.0\n[operator]\nkind = \"plaplace\"\np = 1.5\n[nonlinearity]\nkind = \"tanh\"\n[bogus]\nx = 1\n",
        );
        for needle in ["modes must be", "unknown key 'colour'", "dt must be positive", "p must be > 2", "requires nonlinearity none", "'bogus'"] {
            assert!(e.iter().any(|m| m.contains(needle)), "{needle} not in {e:?}");
        }
    }

    #[test]
    fn wrong_types_are_reported() {
        let e = errors("[solver]\ndt = \"small\"\n[run]\nreplicas = -3\n");
        assert_eq!(e.len(), 2, "{e:?}");
    }

    #[test]
    fn syntax_error_is_a_config_error() {
        assert!(matches!(parse_config("[manifold\n"), Err(Error::Config(_))));
    }

    #[test]
    fn dt_must_divide_horizon() {
        let e = errors("[solver]\nhorizon = 1.0\ndt = 0.3\n");
        assert_eq!(e.len(), 1);
    }

    #[test]
    fn plaplace_mean_zero_initial_data() {
        let e = errors("[operator]\nkind = \"plaplace\"\n[noise]\nkind = \"none\"\n[initial]\nkind = \"mode\"\nindex = 0\n");
        assert!(e[0].contains("mean-zero"));
    }

    #[test]
    fn canonical_text_round_trips() {
        let texts = [
            MINIMAL.to_string(),
            "[manifold]\nmodes = 3\nambient_n = 2\n[metric]\nkind = \"mcf\"\n[operator]\nkind = \"moving_surface\"\nvh = \"cosine\"\nvh_mean = -0.25\nvh_amp = 0.1\nvh_bound = 30\n[solver]\nhorizon = 0.2\ndt = 1e-4\n[noise]\nkind = \"custom\"\nsigma = [1, 0.5, 0.1]\n[initial]\nkind = \"coefficients\"\nvalues = [0.1, 0.2, 0.3, 0, 0, 0, 1e-7]\n[verify]\nseeds = [7]\n".into(),
            "[operator]\nkind = \"general\"\na_mean = 2\na_cos = 0.5\nb = 0.3\nc_cos = 0.2\n[nonlinearity]\nkind = \"tanh\"\ngamma = 0.7\n[metric]\nkind = \"gbm\"\nr = -0.1\nsigma = 0.3\nsteps = 100\nseed = 5\n[output]\ndir = \"res \\\"x\\\"\"\nincrements = true\n".into(),
        ];
        for t in texts {
            let a = parse_config(&t).unwrap();
            let text = a.to_toml();
            let b = parse_config(&text).unwrap();
            assert_eq!(a, b);
            assert_eq!(text, b.to_toml());
        }
    }
}
