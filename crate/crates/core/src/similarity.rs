//! Representation similarity between tasks and between classes.
//!
//! Subspace overlap compares the top-`k` principal directions of two tasks'
//! centered features: `(1/k) ‖U_kᵀ V_k‖²_F`, 1 for identical subspaces and 0
//! for orthogonal ones. Prototype similarity is the cosine between class
//! mean vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurestore::EncodedDataset;
use crate::numeric::{centered_scatter, dot, top_k_eigs, DenseMatrix, Matrix64};

pub const DEFAULT_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityConfig {
    pub k: usize,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K }
    }
}

fn check_k(t: &DenseMatrix, k: usize) -> Result<()> {
    if t.rows() < 2 {
        return Err(Error::BadK { k, max: 0 });
    }
    let max = (t.rows() - 1).min(t.cols());
    if k == 0 || k > max {
        return Err(Error::BadK { k, max });
    }
    Ok(())
}

/// `q x k` orthonormal basis of the top-`k` principal directions of `t`.
pub fn principal_basis(t: &DenseMatrix, k: usize) -> Result<Matrix64> {
    check_k(t, k)?;
    Ok(top_k_eigs(&centered_scatter(t), k)?.vectors)
}

/// `(1/k) ‖Uᵀ V‖²_F` for two `q x k` orthonormal bases.
pub fn basis_overlap(u: &Matrix64, v: &Matrix64) -> Result<f64> {
    if u.rows() != v.rows() || u.cols() != v.cols() || u.cols() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "bases of shape {}x{} and {}x{}",
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols()
        )));
    }
    let k = u.cols();
    let cross = u.transpose().matmul(v)?;
    let sq: f64 = cross.data().iter().map(|x| x * x).sum();
    Ok((sq / k as f64).clamp(0.0, 1.0))
}

pub fn subspace_overlap(ti: &DenseMatrix, tj: &DenseMatrix, k: usize) -> Result<f64> {
    if ti.cols() != tj.cols() {
        return Err(Error::ShapeMismatch(format!(
            "tasks have {} and {} latent dimensions",
            ti.cols(),
            tj.cols()
        )));
    }
    check_k(ti, k)?;
    check_k(tj, k)?;
    basis_overlap(&principal_basis(ti, k)?, &principal_basis(tj, k)?)
}

fn task_bases(tasks: &[&DenseMatrix], k: usize) -> Result<Vec<Matrix64>> {
    if tasks.len() < 2 {
        return Err(Error::NeedTwoTasks);
    }
    let q = tasks[0].cols();
    if let Some(t) = tasks.iter().find(|t| t.cols() != q) {
        return Err(Error::ShapeMismatch(format!(
            "tasks have {q} and {} latent dimensions",
            t.cols()
        )));
    }
    tasks.iter().map(|t| principal_basis(t, k)).collect()
}

/// Symmetric `T x T` matrix of pairwise overlaps, unit diagonal.
pub fn overlap_matrix(tasks: &[&DenseMatrix], k: usize) -> Result<Matrix64> {
    let bases = task_bases(tasks, k)?;
    let n = bases.len();
    let mut m = Matrix64::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let o = basis_overlap(&bases[i], &bases[j])?;
            m[(i, j)] = o;
            m[(j, i)] = o;
        }
    }
    Ok(m)
}

/// Mean overlap over the `T(T-1)/2` unordered task pairs.
pub fn average_overlap(tasks: &[&DenseMatrix], k: usize) -> Result<f64> {
    Ok(mean_upper(&overlap_matrix(tasks, k)?))
}

fn mean_upper(m: &Matrix64) -> f64 {
    let n = m.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += m[(i, j)];
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSimilarity {
    pub class_ids: Vec<u32>,
    /// Cosine between class means, unit diagonal.
    pub matrix: Matrix64,
    /// Mean over class pairs `i < j`.
    pub average: f64,
}

pub fn class_prototype_similarity(ds: &EncodedDataset) -> Result<PrototypeSimilarity> {
    let groups = ds.rows_by_class();
    if groups.len() < 2 {
        return Err(Error::BadConfig(format!(
            "prototype similarity needs at least two classes, got {}",
            groups.len()
        )));
    }
    let mut class_ids = Vec::with_capacity(groups.len());
    let mut protos = Vec::with_capacity(groups.len());
    for (class, rows) in groups {
        let mut mean = vec![0.0f64; ds.dim()];
        for &r in &rows {
            for (m, &v) in mean.iter_mut().zip(ds.row(r)) {
                *m += f64::from(v);
            }
        }
        let norm = dot(&mean, &mean).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroPrototype(class));
        }
        mean.iter_mut().for_each(|m| *m /= norm);
        class_ids.push(class);
        protos.push(mean);
    }
    let n = protos.len();
    let mut matrix = Matrix64::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let c = dot(&protos[i], &protos[j]).clamp(-1.0, 1.0);
            matrix[(i, j)] = c;
            matrix[(j, i)] = c;
        }
    }
    let average = mean_upper(&matrix);
    Ok(PrototypeSimilarity {
        class_ids,
        matrix,
        average,
    })
}
