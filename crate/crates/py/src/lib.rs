use std::path::{Path, PathBuf};

use evospde::config::{parse_config, BuiltScenario, OperatorConfig, ScenarioConfig};
use evospde::geometry::{level_set_components, LevelSetField};
use evospde::noise::canonical_embedding;
use evospde::operators::{PLaplaceForm, WeakForm};
use evospde::solver::{exact_linear_mode, solve_path, SolverConfig};
use evospde::verify::{
    certify, estimate_poincare, estimate_strong_order, estimate_sup_moment, lp_poincare_constant, triangle_wave,
    ProbeSet, ProofConstants,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: evospde::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn constants_dict<'py>(py: Python<'py>, c: &ProofConstants) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in [("c", c.c), ("c1", c.c1), ("c2", c.c2), ("alpha", c.alpha), ("c3", c.c3), ("f", c.f), ("g", c.g)] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// A validated scenario built from a TOML configuration.
#[pyclass(frozen)]
struct Scenario {
    cfg: ScenarioConfig,
    built: BuiltScenario,
}

impl Scenario {
    fn solver(&self, seed: Option<u64>) -> SolverConfig {
        let mut s = self.cfg.solver_config();
        if let Some(seed) = seed {
            s.master_seed = seed;
        }
        s
    }
}

#[pymethods]
impl Scenario {
    /// Parse `text`; table paths are resolved against `base_dir`.
    #[staticmethod]
    #[pyo3(signature = (text, base_dir = None))]
    fn from_toml(text: &str, base_dir: Option<PathBuf>) -> PyResult<Self> {
        let cfg = parse_config(text).map_err(err)?;
        let base = base_dir.unwrap_or_else(|| PathBuf::from("."));
        let built = cfg.build(&base).map_err(err)?;
        Ok(Self { cfg, built })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, Some(base.to_path_buf()))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.built.scenario.dim()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.built.scenario.horizon()
    }

    #[getter]
    fn operator(&self) -> &'static str {
        self.built.scenario.kind.name()
    }

    #[getter]
    fn initial(&self) -> Vec<f64> {
        self.built.scenario.initial.clone()
    }

    /// sha256 of the canonical configuration
    #[getter]
    fn config_digest(&self) -> String {
        self.cfg.digest()
    }

    #[getter]
    fn digest(&self) -> String {
        self.built.scenario.digest()
    }

    fn to_toml(&self) -> String {
        self.cfg.to_toml()
    }

    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        constants_dict(py, &self.built.constants)
    }

    /// One replica's recorded path.
    #[pyo3(signature = (replica = 0, seed = None))]
    fn run<'py>(&self, py: Python<'py>, replica: u64, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
        let tr = solve_path(&self.built.scenario, &self.solver(seed), replica).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("times", &tr.times)?;
        d.set_item("states", &tr.states)?;
        d.set_item("h0_norm_sq", &tr.h0_norm_sq)?;
        d.set_item("hgt_norm_sq", &tr.hgt_norm_sq)?;
        d.set_item("sup_norm_sq", tr.sup_norm_sq)?;
        d.set_item("steps", tr.steps)?;
        d.set_item("digest", &tr.digest)?;
        Ok(d)
    }

    /// Trajectory CSV for one replica, as the command line writes it.
    #[pyo3(signature = (replica = 0, seed = None))]
    fn trajectory_csv(&self, replica: u64, seed: Option<u64>) -> PyResult<String> {
        Ok(solve_path(&self.built.scenario, &self.solver(seed), replica).map_err(err)?.to_csv())
    }

    /// Monte Carlo estimate of E sup_t ‖X(t)‖²; returns (mean, standard error).
    #[pyo3(signature = (replicas, seed = None))]
    fn sup_moment(&self, replicas: usize, seed: Option<u64>) -> PyResult<(f64, f64)> {
        let m = estimate_sup_moment(&self.built.scenario, &self.solver(seed), replicas).map_err(err)?;
        Ok((m.mean, m.std_error))
    }

    /// (mean multiplier, variance) of coefficient `j` at time `t`; linear diagonal drifts only.
    fn exact_mode(&self, j: usize, t: f64) -> PyResult<(f64, f64)> {
        exact_linear_mode(&self.built.scenario, j, t).map_err(err)
    }

    /// Probe the drift against the four hypotheses with the analytic constants.
    #[pyo3(signature = (seed = 1, samples = None))]
    fn verify<'py>(&self, py: Python<'py>, seed: u64, samples: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let drift = self.built.drift.as_ref();
        let mut probes = ProbeSet::random(drift, samples.unwrap_or(self.cfg.verify.samples), seed);
        if let OperatorConfig::PLaplace { p } = self.cfg.operator {
            let f = PLaplaceForm::new(&self.built.scenario.metric, p).map_err(err)?;
            probes = probes.with_direction(&triangle_wave(f.basis()), &[0.0, self.horizon()]);
        }
        let label = format!("{}_seed{seed}", self.operator());
        let r = certify(drift, &self.built.constants, &probes, &label).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("pass", r.passed())?;
        d.set_item("constants", constants_dict(py, &r.constants)?)?;
        d.set_item("hemicontinuity", r.hemicontinuity.passed)?;
        d.set_item("monotonicity", r.monotonicity.estimate)?;
        d.set_item("coercivity_violation", r.coercivity.estimate)?;
        d.set_item("boundedness", r.boundedness.estimate)?;
        d.set_item("report", r.to_kv())?;
        Ok(d)
    }

    /// Strong error at T for each step in `dts` against a `reference_dt` solve
    /// on the same Brownian path.
    #[pyo3(signature = (dts, reference_dt, replicas, seed = None))]
    fn strong_order<'py>(
        &self,
        py: Python<'py>,
        dts: Vec<f64>,
        reference_dt: f64,
        replicas: usize,
        seed: Option<u64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let fine = SolverConfig { dt: reference_dt, ..self.solver(seed) };
        let rep = estimate_strong_order(&self.built.scenario, &fine, &dts, replicas).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("dts", rep.dts)?;
        d.set_item("errors", rep.errors)?;
        d.set_item("slope", rep.slope)?;
        d.set_item("exact", rep.exact)?;
        Ok(d)
    }

    /// Spectral Poincaré constant of a static metric.
    fn poincare(&self) -> PyResult<f64> {
        estimate_poincare(&self.built.scenario.metric).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Scenario(operator={:?}, dim={}, horizon={})", self.operator(), self.dim(), self.horizon())
    }
}

/// Canonical TOML of a configuration; raises ValueError listing every problem.
#[pyfunction]
fn canonical_config(text: &str) -> PyResult<String> {
    Ok(parse_config(text).map_err(err)?.to_toml())
}

/// Contours of the double-well at level `c`: (component count, polylines).
#[pyfunction]
#[pyo3(signature = (c, grid = 256))]
fn level_set(c: f64, grid: usize) -> PyResult<(usize, Vec<Vec<(f64, f64)>>)> {
    let field = LevelSetField::new(1.5, 1.5, grid, grid).map_err(err)?;
    let ls = level_set_components(&field, c).map_err(err)?;
    Ok((ls.components, ls.polylines))
}

/// ‖B‖²_HS of the canonical embedding with `modes` columns.
#[pyfunction]
fn canonical_hs_norm_sq(modes: usize) -> PyResult<f64> {
    Ok(canonical_embedding(modes).map_err(err)?.hs_norm_sq())
}

#[pyfunction]
#[pyo3(name = "lp_poincare_constant")]
fn lp_poincare(p: f64, f0: f64) -> f64 {
    lp_poincare_constant(p, f0)
}

#[pymodule]
fn evospde_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(canonical_config, m)?)?;
    m.add_function(wrap_pyfunction!(level_set, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_hs_norm_sq, m)?)?;
    m.add_function(wrap_pyfunction!(lp_poincare, m)?)?;
    Ok(())
}
