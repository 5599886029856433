pub mod gbm;
pub mod levelset;
pub mod manifold;
pub mod metric;
pub mod pullback;

pub use gbm::{gbm_factor_path, GbmDriver};
pub use levelset::{level_set_components, LevelSet, LevelSetField};
pub use manifold::{ManifoldKind, ReferenceManifold};
pub use metric::{build_metric_family, mcf_radius, norm_equivalence_constants, FactorProfile, FactorTable, MetricFamily};
pub use pullback::PullbackMap;
