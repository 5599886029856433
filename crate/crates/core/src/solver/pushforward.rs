use crate::error::{Error, Result};
use crate::geometry::PullbackMap;
use crate::solver::Trajectory;
use crate::spectral::norm_sq;

/// Norms of u(t) = w(t) ∘ X⁻¹(·, t) on the moving surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTrajectory {
    pub times: Vec<f64>,
    /// ‖w(t)‖²_{H₀}
    pub reference_norm_sq: Vec<f64>,
    /// ‖u(t)‖²_{L²(M(t))}
    pub surface_norm_sq: Vec<f64>,
    /// b₁b₂/a₂
    pub regularity_constant: f64,
}

impl SurfaceTrajectory {
    /// Largest ratio ‖u(t)‖² / ‖w(t)‖² over the recorded times.
    pub fn max_ratio(&self) -> f64 {
        self.surface_norm_sq
            .iter()
            .zip(&self.reference_norm_sq)
            .filter(|(_, r)| **r > 0.0)
            .map(|(s, r)| s / r)
            .fold(0.0, f64::max)
    }
}

pub fn pushforward_solution(traj: &Trajectory, map: &PullbackMap) -> Result<SurfaceTrajectory> {
    let end = traj.times.last().copied().unwrap_or(0.0);
    if end > map.horizon() + 1e-12 {
        return Err(Error::OutsideHorizon { t: end, horizon: map.horizon() });
    }
    let (_, b1) = map.metric().determinant_bounds();
    let (a2, b2) = map.composition_bounds();
    let mut surface = Vec::with_capacity(traj.times.len());
    for (t, w) in traj.times.iter().zip(&traj.states) {
        let u = map.compose(*t, w)?;
        surface.push(map.h_t_inner(*t, &u, &u)?);
    }
    Ok(SurfaceTrajectory {
        times: traj.times.clone(),
        reference_norm_sq: traj.states.iter().map(|w| norm_sq(w)).collect(),
        surface_norm_sq: surface,
        regularity_constant: b1 * b2 / a2,
    })
}
