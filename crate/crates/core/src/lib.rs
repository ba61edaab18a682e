//! Clustering for order-3 tensor block models with heteroskedastic noise.
//!
//! The crate provides
//!
//! * dense tensors with cyclic matricization and multilinear products
//!   ([`tensor`], [`matrix`]);
//! * a cyclic Jacobi eigensolver and Gram/diagonal kernels ([`linalg`]);
//! * thresholded deflated HeteroPCA and the vanilla SVD subspace
//!   ([`spectral`]);
//! * k-means++/Lloyd, the two clustering pipelines and high-order Lloyd
//!   refinement ([`kmeans`], [`pipeline`], [`hlloyd`]);
//! * block-model generators and evaluation metrics ([`model`], [`metrics`]);
//! * a seeded Monte-Carlo harness with CSV output ([`experiment`]).

pub mod error;
pub mod experiment;
pub mod hlloyd;
pub mod kmeans;
pub mod labels;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use hlloyd::{hlloyd, HLloydResult};
pub use kmeans::{approx_kmeans, KMeansConfig, KMeansResult};
pub use labels::ClusterAssignment;
pub use matrix::{kron, Matrix};
pub use model::{BlockModel, GeneratorOptions, NoiseKind, NoiseSpec};
pub use pipeline::{hhc, hsc, ClusterResult, Method};
pub use spectral::{SpectralConfig, SubspaceEstimate, TauMode};
pub use tensor::{dematricize, matricize, mode_product, Tensor3};
