//! Adversarially robust spectral features.
//!
//! The pipeline turns a point set into a threshold (or Gaussian) graph,
//! takes low eigenvectors of its Laplacian as features, and bounds how far
//! those features can move when every point is perturbed by at most `ε`:
//!
//! * [`dataio`]: datasets, loaders, synthetic generators, JSON/CSV output
//! * [`metricgraph`]: distance matrices, threshold/shifted/Gaussian graphs, Laplacians
//! * [`eigen`]: deterministic symmetric eigensolver and null-space canonicalization
//! * [`features`]: second-eigenvector features, k-feature maps, out-of-sample extension
//! * [`certify`]: robustness certificates (upper and lower bounds), auto threshold
//! * [`attack`]: seeded perturbation search used to falsify certificates
//! * [`spheres`]: concentric-spheres construction and its feature collapse
//! * [`bench`]: logistic head, accuracy curves and the bound/robustness correlation study
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the search, benchmark and
//! I/O layers use.

pub mod attack;
pub mod bench;
pub mod certify;
pub mod dataio;
pub mod eigen;
pub mod error;
pub mod features;
pub mod linalg;
pub mod metricgraph;
pub mod rng;
pub mod scalar;
pub mod spheres;

pub use dataio::MetricKind;
pub use error::{Error, Result};
pub use metricgraph::{GraphKind, LaplacianVariant, Shift};
pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type Dataset = dataio::Dataset<f64>;
pub type DistanceMatrix = metricgraph::DistanceMatrix<f64>;
pub type Graph = metricgraph::Graph<f64>;
pub type Laplacian = metricgraph::Laplacian<f64>;
pub type SpectralDecomposition = eigen::SpectralDecomposition<f64>;
pub type Tolerances = eigen::Tolerances<f64>;
pub type FeatureVector = features::FeatureVector<f64>;
pub type FeatureMatrix = features::FeatureMatrix<f64>;
pub type GraphSpec = features::GraphSpec<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type Dataset32 = dataio::Dataset<f32>;

pub use certify::Certificate;

/// Toolkit version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
