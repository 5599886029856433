//! Ready-made scenarios for the standard settings.

use std::sync::Arc;

use crate::error::Result;
use crate::geometry::{build_metric_family, FactorProfile, MetricFamily, PullbackMap, ReferenceManifold};
use crate::noise::NoiseModel;
use crate::operators::{
    GeneralParabolicForm, McfSphereForm, MovingSurfaceForm, NonlinearitySpec, PLaplaceForm, ParabolicCoefficients,
    VhField, ZeroForm,
};
use crate::solver::{OperatorKind, Scenario};

fn label(parts: &[(&str, String)], noise: &Option<NoiseModel>, nl: &NonlinearitySpec) -> String {
    let mut s: String = parts.iter().map(|(k, v)| format!("{k}={v};")).collect();
    s.push_str(&format!("nl={nl:?};noise={:?}", noise.as_ref().map(|n| n.sigma().to_vec())));
    s
}

/// Pulled-back heat equation on the unit circle shrinking by mean curvature flow.
pub fn mcf_circle(n: usize, horizon: f64, modes: usize, noise: Option<NoiseModel>, initial: Vec<f64>) -> Result<Scenario> {
    let base = ReferenceManifold::new(crate::geometry::ManifoldKind::CircleUnit, n, modes, 8 * modes + 1)?;
    let metric = build_metric_family(base, FactorProfile::Mcf { n }, horizon)?;
    let form = McfSphereForm::new(n, metric.basis()?, horizon)?;
    let nl = NonlinearitySpec::Zero;
    let sc = Scenario {
        label: label(&[("op", "mcf_sphere".into()), ("n", n.to_string()), ("T", horizon.to_string()), ("K", modes.to_string())], &noise, &nl),
        form: Arc::new(form),
        kind: OperatorKind::McfSphere { n },
        nl,
        noise,
        metric,
        initial,
    };
    sc.validate()?;
    Ok(sc)
}

/// Heat equation on a static circle with metric factor f₀.
pub fn static_heat(modes: usize, horizon: f64, f0: f64, noise: Option<NoiseModel>, initial: Vec<f64>) -> Result<Scenario> {
    let metric = build_metric_family(ReferenceManifold::circle(modes)?, FactorProfile::Constant(f0), horizon)?;
    let form = MovingSurfaceForm::new(metric.clone(), VhField::Zero, Some(0.0))?;
    let nl = NonlinearitySpec::Zero;
    let sc = Scenario {
        label: label(&[("op", "heat".into()), ("f0", f0.to_string()), ("T", horizon.to_string()), ("K", modes.to_string())], &noise, &nl),
        form: Arc::new(form),
        kind: OperatorKind::Heat,
        nl,
        noise,
        metric,
        initial,
    };
    sc.validate()?;
    Ok(sc)
}

/// dX = i dW on a static unit circle.
pub fn pure_noise(modes: usize, horizon: f64, noise: Option<NoiseModel>) -> Result<Scenario> {
    let metric = build_metric_family(ReferenceManifold::circle(modes)?, FactorProfile::Constant(1.0), horizon)?;
    let dim = 2 * modes + 1;
    let nl = NonlinearitySpec::Zero;
    let sc = Scenario {
        label: label(&[("op", "zero".into()), ("T", horizon.to_string()), ("K", modes.to_string())], &noise, &nl),
        form: Arc::new(ZeroForm::new(metric.basis()?, horizon)),
        kind: OperatorKind::Zero,
        nl,
        noise,
        metric,
        initial: vec![0.0; dim],
    };
    sc.validate()?;
    Ok(sc)
}

/// General parabolic operator conjugated by F_t on an isotropic family.
pub fn general_parabolic(
    metric: MetricFamily,
    coef: ParabolicCoefficients,
    nl: NonlinearitySpec,
    noise: Option<NoiseModel>,
    initial: Vec<f64>,
) -> Result<Scenario> {
    let form = GeneralParabolicForm::new(coef, PullbackMap::new(metric.clone()))?;
    let sc = Scenario {
        label: label(
            &[("op", "general".into()), ("coef", format!("{coef:?}")), ("metric", format!("{:?}", metric.profile())), ("T", metric.horizon().to_string())],
            &noise,
            &nl,
        ),
        form: Arc::new(form),
        kind: OperatorKind::General,
        nl,
        noise,
        metric,
        initial,
    };
    sc.validate()?;
    Ok(sc)
}

/// p-Laplace drift on a static unit circle.
pub fn p_laplace(modes: usize, horizon: f64, p: f64, noise: Option<NoiseModel>, initial: Vec<f64>) -> Result<Scenario> {
    let metric = build_metric_family(ReferenceManifold::circle(modes)?, FactorProfile::Constant(1.0), horizon)?;
    let form = PLaplaceForm::new(&metric, p)?;
    let nl = NonlinearitySpec::Zero;
    let sc = Scenario {
        label: label(&[("op", "plaplace".into()), ("p", p.to_string()), ("T", horizon.to_string()), ("K", modes.to_string())], &noise, &nl),
        form: Arc::new(form),
        kind: OperatorKind::PLaplace,
        nl,
        noise,
        metric,
        initial,
    };
    sc.validate()?;
    Ok(sc)
}

/// Coefficient vector with a single nonzero entry.
pub fn unit_mode(dim: usize, j: usize, amplitude: f64) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    c[j] = amplitude;
    c
}
