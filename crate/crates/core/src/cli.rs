//! `evospde` command line: run, verify, convergence, levelset.
//!
//! Exit status 0 means success, 2 a failed check, 1 an error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{hex_digest, parse_config, MetricConfig, OperatorConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{level_set_components, LevelSetField};
use crate::noise::{increments_csv, NoiseStream};
use crate::operators::{GalerkinOperator, PLaplaceForm, WeakForm};
use crate::solver::{build_plan, solve_path_with, solve_summary, SolverConfig};
use crate::verify::{
    certify, estimate_lp_poincare, estimate_poincare, estimate_strong_order, lp_poincare_constant, triangle_wave,
    MomentEstimate, ProbeSet,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "evospde", version, about = "Stochastic PDEs on evolving curves: simulation and hypothesis checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (TOML)
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; overrides [output] dir
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed; overrides [run] seed and [verify] seeds
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Replica count; overrides [run] replicas and [convergence] replicas
    #[arg(long, value_name = "M")]
    pub replicas: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate replicas and write trajectories
    Run(Common),
    /// Check hemicontinuity, monotonicity, coercivity and boundedness
    Verify(Common),
    /// Strong error against a fine reference under shared noise
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Coarse steps, largest first; overrides [convergence] dts
        #[arg(long, value_delimiter = ',')]
        dts: Option<Vec<f64>>,
    },
    /// Contours of the double-well level-set function
    Levelset {
        #[arg(required = true, allow_negative_numbers = true)]
        levels: Vec<f64>,
        /// Grid points per axis
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
}

/// Collects output files and their digests for the manifest.
struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.insert(name.to_string(), hex_digest(contents.as_bytes()));
        Ok(())
    }

    fn manifest(mut self, command: &str, extra: serde_json::Value) -> Result<()> {
        let files = std::mem::take(&mut self.files);
        let mut v = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "files": files,
        });
        if let (Some(obj), serde_json::Value::Object(e)) = (v.as_object_mut(), extra) {
            obj.extend(e);
        }
        let text = serde_json::to_string_pretty(&v).expect("json serialization") + "\n";
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Parsed config with command-line overrides applied, plus the directory
/// that relative table paths refer to.
fn load(common: &Common) -> Result<(ScenarioConfig, PathBuf)> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Error::Io(format!("{}: {e}", common.config.display())))?;
    let mut cfg = parse_config(&text)?;
    let base = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
    if let MetricConfig::Table { path } = &mut cfg.metric {
        // absolute, so the copy written next to the outputs still resolves
        let abs = fs::canonicalize(base.join(&*path)).map_err(|e| Error::Io(format!("{path}: {e}")))?;
        *path = abs.to_string_lossy().into_owned();
    }
    if let Some(s) = common.seed {
        if s > i64::MAX as u64 {
            return Err(Error::InvalidParameter(format!("seed {s} exceeds {}", i64::MAX)));
        }
        cfg.run.seed = s;
        cfg.verify.seeds = vec![s];
    }
    if let Some(m) = common.replicas {
        if m == 0 {
            return Err(Error::InvalidParameter("--replicas must be >= 1".into()));
        }
        cfg.run.replicas = m;
        cfg.convergence.replicas = m;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    Ok((cfg, base))
}

fn seeds_json(cfg: &ScenarioConfig) -> serde_json::Value {
    let metric_seed = match &cfg.metric {
        MetricConfig::Gbm(d) => Some(d.seed),
        _ => None,
    };
    serde_json::json!({
        "master_seed": cfg.run.seed,
        "replicas": cfg.run.replicas,
        "metric_seed": metric_seed,
        "config_digest": cfg.digest(),
        "config": "config.toml",
    })
}

pub fn cmd_run(common: &Common) -> Result<i32> {
    let (cfg, base) = load(common)?;
    let built = cfg.build(&base)?;
    let sc = &built.scenario;
    let solver = cfg.solver_config();
    let plan = build_plan(sc, &solver)?;
    let keep = cfg.output.trajectories.min(cfg.run.replicas);
    let results: Vec<_> = (0..cfg.run.replicas as u64)
        .into_par_iter()
        .map(|r| {
            if (r as usize) < keep {
                let tr = solve_path_with(sc, &solver, &plan, r)?;
                Ok((tr.sup_norm_sq, tr.h0_norm_sq.last().copied().unwrap_or(0.0), Some(tr)))
            } else {
                let s = solve_summary(sc, &solver, &plan, r)?;
                let fin = crate::spectral::norm_sq(&s.final_state);
                Ok((s.sup_norm_sq, fin, None))
            }
        })
        .collect::<Result<_>>()?;

    let mut out = Outputs::new(Path::new(&cfg.output.dir))?;
    out.write("config.toml", &cfg.to_toml())?;
    let mut summary = String::from("replica,sup_h0_norm_sq,final_h0_norm_sq\n");
    for (r, (sup, fin, tr)) in results.iter().enumerate() {
        summary.push_str(&format!("{r},{sup},{fin}\n"));
        if let Some(tr) = tr {
            out.write(&format!("trajectory_{r:04}.csv"), &tr.to_csv())?;
            out.write(&format!("trajectory_{r:04}.json"), &tr.metadata_json())?;
        }
    }
    out.write("replicas.csv", &summary)?;
    let m = MomentEstimate::from_samples(results.iter().map(|x| x.0).collect());
    out.write(
        "moments.txt",
        &format!(
            "replicas={}\nsup_moment_mean={}\nsup_moment_std_error={}\nsup_moment_half_width={}\n",
            m.replicas, m.mean, m.std_error, m.half_width
        ),
    )?;
    let steps = solver.steps_for(sc.horizon())?;
    let mut ks: Vec<usize> = (0..=steps).step_by(solver.record_stride).collect();
    if ks.last() != Some(&steps) {
        ks.push(steps);
    }
    let mut factor = String::from("t,f\n");
    for k in ks {
        let t = k as f64 * solver.dt;
        factor.push_str(&format!("{t},{}\n", sc.metric.factor(t)?));
    }
    out.write("factor.csv", &factor)?;
    if cfg.output.increments {
        if let Some(nm) = &sc.noise {
            let stream = NoiseStream::new(solver.master_seed, 0);
            let incs: Vec<_> =
                (0..steps as u64).map(|k| stream.increment_at(nm, solver.dt, k).map(|i| (k, i))).collect::<Result<_>>()?;
            out.write("increments_0000.csv", &increments_csv(incs.iter().map(|(k, i)| (*k, i))))?;
        }
    }
    let mut extra = seeds_json(&cfg);
    extra["scenario_digest"] = sc.digest().into();
    out.manifest("run", extra)?;
    Ok(EXIT_OK)
}

pub fn cmd_verify(common: &Common) -> Result<i32> {
    let (cfg, base) = load(common)?;
    let built = cfg.build(&base)?;
    let sc = &built.scenario;
    let drift = built.drift.as_ref();
    let mut out = Outputs::new(Path::new(&cfg.output.dir))?;
    out.write("config.toml", &cfg.to_toml())?;
    let mut all_pass = true;
    let plap = match cfg.operator {
        OperatorConfig::PLaplace { p } => Some(PLaplaceForm::new(&sc.metric, p)?),
        _ => None,
    };
    for &seed in &cfg.verify.seeds {
        let mut probes = ProbeSet::random(drift, cfg.verify.samples, seed);
        if let Some(f) = &plap {
            probes = probes.with_direction(&triangle_wave(f.basis()), &[0.0, sc.horizon()]);
        }
        let label = format!("{}_seed{seed}", sc.kind.name());
        let report = certify(drift, &built.constants, &probes, &label)?;
        all_pass &= report.passed();
        out.write(&format!("report_seed{seed}.txt"), &report.to_kv())?;
        out.write(&format!("ratios_seed{seed}.csv"), &report.ratios_csv(&probes))?;
    }
    if drift.is_linear() {
        out.write("pairing_t0.csv", &GalerkinOperator::snapshot(drift, 0.0)?.to_csv())?;
    }
    let mut consts = String::new();
    if sc.metric.is_static() {
        consts.push_str(&format!("poincare={}\n", estimate_poincare(&sc.metric)?));
    }
    if let Some(f) = &plap {
        consts.push_str(&format!("lp_poincare={}\n", lp_poincare_constant(f.p(), f.basis().reference_factor())));
        consts.push_str(&format!("lp_poincare_ascent={}\n", estimate_lp_poincare(f, cfg.run.seed, 2000)?));
    }
    if !consts.is_empty() {
        out.write("poincare.txt", &consts)?;
    }
    let mut extra = seeds_json(&cfg);
    extra["verify_seeds"] = cfg.verify.seeds.clone().into();
    extra["scenario_digest"] = sc.digest().into();
    extra["pass"] = all_pass.into();
    out.manifest("verify", extra)?;
    Ok(if all_pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

pub fn cmd_convergence(common: &Common, dts: Option<&[f64]>) -> Result<i32> {
    let (mut cfg, base) = load(common)?;
    if let Some(d) = dts {
        cfg.convergence.dts = d.to_vec();
    }
    let built = cfg.build(&base)?;
    let sc = &built.scenario;
    let c = &cfg.convergence;
    let fine = SolverConfig { dt: c.reference_dt, ..cfg.solver_config() };
    let rep = estimate_strong_order(sc, &fine, &c.dts, c.replicas)?;
    let pass = rep.exact || rep.slope.is_some_and(|s| s >= c.min_slope);
    let mut out = Outputs::new(Path::new(&cfg.output.dir))?;
    out.write("config.toml", &cfg.to_toml())?;
    out.write("convergence.csv", &rep.to_csv())?;
    out.write(
        "convergence.txt",
        &format!(
            "reference_dt={}\nreplicas={}\nslope={}\nresidual={}\nexact={}\nmin_slope={}\npass={pass}\n",
            rep.reference_dt,
            c.replicas,
            rep.slope.map_or("none".to_string(), |s| s.to_string()),
            rep.residual,
            rep.exact,
            c.min_slope
        ),
    )?;
    let mut extra = seeds_json(&cfg);
    extra["replicas"] = c.replicas.into();
    extra["scenario_digest"] = sc.digest().into();
    extra["pass"] = pass.into();
    out.manifest("convergence", extra)?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

pub fn cmd_levelset(levels: &[f64], grid: usize, dir: &Path) -> Result<i32> {
    let field = LevelSetField::new(1.5, 1.5, grid, grid)?;
    let mut out = Outputs::new(dir)?;
    let mut summary = String::from("c,components\n");
    for (i, &c) in levels.iter().enumerate() {
        let ls = level_set_components(&field, c)?;
        summary.push_str(&format!("{c},{}\n", ls.components));
        out.write(&format!("contour_{i:02}.csv"), &ls.to_csv())?;
    }
    out.write("levelset.csv", &summary)?;
    out.manifest("levelset", serde_json::json!({ "levels": levels, "grid": grid }))?;
    Ok(EXIT_OK)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Verify(c) => cmd_verify(c),
        Command::Convergence { common, dts } => cmd_convergence(common, dts.as_deref()),
        Command::Levelset { levels, grid, out } => cmd_levelset(levels, *grid, out),
    }
}

/// Parse arguments, run, and map the outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
