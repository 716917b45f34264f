//! Hyperspectral unmixing with nonnegative matrix factorization and its
//! graph-regularized variant.
//!
//! The crate covers the whole experiment loop:
//!
//! * [`data`] and [`io`]: spectra, cubes, label maps and their file formats;
//! * [`simulate`]: synthetic mixed-pixel scenes with known ground truth;
//! * [`graph`]: pixel similarity graphs and Laplacians;
//! * [`solver`]: multiplicative-update NMF / GNMF with sum-to-one abundances;
//! * [`subspace`]: PCA-based endmember count estimation;
//! * [`metrics`]: spectral and abundance angle distances with optimal matching.
//!
//! Numeric code is generic over [`Scalar`] (`f32`, `f64`); the aliases below
//! fix it to `f64`, which the file formats and the CLI use.

pub mod data;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod scalar;
pub mod simulate;
pub mod solver;
pub mod subspace;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type HyperCube = data::HyperCube<f64>;
pub type DataMatrix = data::DataMatrix<f64>;
pub type AbundanceMatrix = data::AbundanceMatrix<f64>;
pub type EndmemberMatrix = data::EndmemberMatrix<f64>;
pub type WeightGraph = graph::WeightGraph<f64>;
pub type Laplacian = graph::Laplacian<f64>;
pub type Kernel = simulate::Kernel<f64>;
pub type SimulatedScene = simulate::SimulatedScene<f64>;
pub type Factorization = solver::Factorization<f64>;
