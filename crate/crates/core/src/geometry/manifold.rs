use crate::error::{Error, Result};
use crate::spectral::FourierBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    /// Unit circle S¹ embedded in ℝⁿ-style formulas with ambient dimension n.
    CircleUnit,
    /// Flat 1D torus ℝ / 2πℤ (no embedding, no curvature flow).
    FlatTorus1D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceManifold {
    kind: ManifoldKind,
    ambient_dim: usize,
    grid_size: usize,
    modes: usize,
}

impl ReferenceManifold {
    pub fn new(kind: ManifoldKind, ambient_dim: usize, modes: usize, grid_size: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::InvalidParameter(format!("ambient dimension {ambient_dim} < 2")));
        }
        if modes < 1 {
            return Err(Error::InvalidParameter("mode count must be >= 1".into()));
        }
        if grid_size < 4 * modes + 1 {
            return Err(Error::InvalidParameter(format!(
                "grid size {grid_size} below 4K+1 = {}",
                4 * modes + 1
            )));
        }
        Ok(Self { kind, ambient_dim, grid_size, modes })
    }

    /// Unit circle (n = 2) with the default grid 8K+1.
    pub fn circle(modes: usize) -> Result<Self> {
        Self::new(ManifoldKind::CircleUnit, 2, modes, 8 * modes + 1)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn basis(&self, f0: f64) -> Result<FourierBasis> {
        FourierBasis::with_reference_factor(self.modes, self.grid_size, f0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_enforced() {
        assert!(ReferenceManifold::new(ManifoldKind::CircleUnit, 1, 4, 17).is_err());
        assert!(ReferenceManifold::new(ManifoldKind::CircleUnit, 2, 4, 16).is_err());
        let m = ReferenceManifold::new(ManifoldKind::FlatTorus1D, 2, 4, 17).unwrap();
        assert_eq!(m.dim(), 9);
    }
}
