//! Dense linear algebra and statistics kernels.
//!
//! Feature data lives in 32-bit [`DenseMatrix`]; every reduction accumulates
//! in 64-bit and derived matrices are [`Matrix64`]. All functions are pure.

mod eig;
mod matrix;
mod solve;
mod stats;

pub use eig::{top_k_eigs, EigPair, SYMMETRY_TOL};
pub(crate) use matrix::dot;
pub use matrix::{DenseMatrix, Matrix64};
pub use solve::{cholesky, spd_solve};
pub use stats::{centered_scatter, covariance, ols_r2, pearson_r};
