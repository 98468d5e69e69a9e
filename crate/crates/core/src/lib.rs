//! Structure recovery for Gaussian graphical models by thresholding the
//! sample correlation matrix, together with reference penalized estimators
//! and a seeded simulation harness.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the double-precision instantiation used by the
//! simulation and experiment layers.

pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod normal;
pub mod penalized;
pub mod sampling;
pub mod scalar;
pub mod screening;
pub mod simgen;

pub use error::{Error, Result};
pub use graph::{
    confusion, connected_components, partitions_equal, ComponentLabeling, ConfusionCounts,
};
pub use linalg::{cholesky, cov_to_corr, eigen_extremes, invert_spd, Cholesky, SymMat};
pub use normal::{normal_cdf, normal_quantile};
pub use penalized::{
    graphical_lasso, lasso_cd, neighborhood_selection, pattern_of, soft_threshold, CombineRule,
    GlassoOptions, GlassoSolution, LassoOptions, LassoSolution,
};
pub use sampling::{
    mvn_sample, sample_correlation, standardize_columns, DataMat, ScaleDenominator, SeededRng,
};
pub use scalar::Scalar;
pub use screening::{
    grass_edge_set, grass_neighborhood, resolve_threshold, threshold_for_edge_count,
    threshold_path, EdgeSet, ThresholdRule,
};
pub use simgen::{build_instance, Family, GroundTruthInstance, SimulationConfig};

pub type SymMatrix = SymMat<f64>;
pub type DataMatrix = DataMat<f64>;
pub type CholeskyFactor = Cholesky<f64>;
