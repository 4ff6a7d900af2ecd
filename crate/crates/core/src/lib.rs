//! Continual learning in the latent space of frozen feature encoders.
//!
//! The crate builds class-incremental streams out of pre-encoded datasets,
//! trains replay MLPs, nearest-mean and streaming LDA classifiers on them, and
//! computes accuracy-matrix metrics, representation similarity and analytic
//! compute cost. Everything is deterministic given its seeds.

pub mod classifiers;
pub mod compute;
pub mod error;
pub mod featurestore;
pub mod metrics;
pub mod numeric;
pub mod replay;
pub mod runner;
pub mod seed;
pub mod similarity;
pub mod streams;
pub mod synth;

pub use error::{Error, Result};
pub use featurestore::{DatasetMeta, EncodedDataset, SplitDataset};
pub use numeric::{DenseMatrix, EigPair, Matrix64};
pub use streams::{Stream, TaskSpec};
