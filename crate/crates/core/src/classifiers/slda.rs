//! Streaming linear discriminant analysis: running class means plus a shared
//! within-class covariance, updated one sample at a time.

use std::collections::BTreeMap;

use super::{argmax_lowest_id, Predictor};
use crate::error::{Error, Result};
use crate::numeric::{dot, spd_solve, DenseMatrix, Matrix64};

pub const DEFAULT_SHRINKAGE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
struct ClassStats {
    mean: Vec<f64>,
    count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SldaState {
    dim: usize,
    shrinkage: f64,
    classes: BTreeMap<u32, ClassStats>,
    /// Sum of outer products of class-centered samples; only the upper
    /// triangle is maintained during updates.
    scatter: Matrix64,
    total: u64,
}

impl SldaState {
    pub fn new(dim: usize, shrinkage: f64) -> Result<Self> {
        if !(shrinkage > 0.0 && shrinkage <= 1.0) {
            return Err(Error::BadConfig(format!(
                "SLDA shrinkage must lie in (0, 1], got {shrinkage}"
            )));
        }
        Ok(Self {
            dim,
            shrinkage,
            classes: BTreeMap::new(),
            scatter: Matrix64::zeros(dim, dim),
            total: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn class_ids(&self) -> Vec<u32> {
        self.classes.keys().copied().collect()
    }

    pub fn count(&self, class: u32) -> u64 {
        self.classes.get(&class).map_or(0, |c| c.count)
    }

    pub fn mean(&self, class: u32) -> Option<&[f64]> {
        self.classes.get(&class).map(|c| c.mean.as_slice())
    }

    /// Welford step with the pre-update class mean: the scatter gains
    /// `n/(n+1) δδᵀ`, which is zero for a class's first sample.
    pub fn update_one(&mut self, x: &[f32], y: u32) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "SLDA expects {} features, got {}",
                self.dim,
                x.len()
            )));
        }
        let stats = self.classes.entry(y).or_insert_with(|| ClassStats {
            mean: vec![0.0; x.len()],
            count: 0,
        });
        let n = stats.count as f64;
        let delta: Vec<f64> = x
            .iter()
            .zip(&stats.mean)
            .map(|(&v, m)| f64::from(v) - m)
            .collect();
        if stats.count > 0 {
            let w = n / (n + 1.0);
            for i in 0..self.dim {
                let di = w * delta[i];
                if di == 0.0 {
                    continue;
                }
                let row = &mut self.scatter.row_mut(i)[i..];
                for (s, &dj) in row.iter_mut().zip(&delta[i..]) {
                    *s += di * dj;
                }
            }
        }
        for (m, d) in stats.mean.iter_mut().zip(&delta) {
            *m += d / (n + 1.0);
        }
        stats.count += 1;
        self.total += 1;
        Ok(())
    }

    pub fn update(&mut self, x: &DenseMatrix, y: &[u32]) -> Result<()> {
        if x.rows() != y.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows with {} labels",
                x.rows(),
                y.len()
            )));
        }
        for (row, &label) in x.row_iter().zip(y) {
            self.update_one(row, label)?;
        }
        Ok(())
    }

    /// Population covariance of all class-centered samples seen so far.
    pub fn covariance(&self) -> Matrix64 {
        let mut cov = self.scatter.clone();
        for i in 0..self.dim {
            for j in 0..i {
                cov[(i, j)] = cov[(j, i)];
            }
        }
        if self.total > 0 {
            cov.scale(1.0 / self.total as f64);
        }
        cov
    }

    /// Freezes the state into linear discriminants
    /// `δ_c(x) = w_c·x − ½ μ_c·w_c` with `w_c = Σ_ε⁻¹ μ_c`,
    /// `Σ_ε = (1−ε)Σ + εI`, and uniform class priors.
    pub fn classifier(&self) -> Result<SldaClassifier> {
        if self.classes.len() < 2 {
            return Err(Error::EmptyModel(format!(
                "SLDA needs at least two classes, has {}",
                self.classes.len()
            )));
        }
        let mut sigma = self.covariance();
        sigma.scale(1.0 - self.shrinkage);
        sigma.add_diagonal(self.shrinkage);
        let means: Vec<&[f64]> = self.classes.values().map(|c| c.mean.as_slice()).collect();
        let w = spd_solve(&sigma, &Matrix64::from_columns(&means)?)?;
        let weights = w.transpose();
        let bias = means
            .iter()
            .enumerate()
            .map(|(c, mu)| -0.5 * dot(mu, weights.row(c)))
            .collect();
        Ok(SldaClassifier {
            class_ids: self.class_ids(),
            weights,
            bias,
        })
    }
}

/// Frozen discriminants; `weights` holds one row `w_c` per class.
#[derive(Debug, Clone, PartialEq)]
pub struct SldaClassifier {
    class_ids: Vec<u32>,
    weights: Matrix64,
    bias: Vec<f64>,
}

impl SldaClassifier {
    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    pub fn weights(&self) -> &Matrix64 {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Discriminant scores, `rows x C` row-major.
    pub fn scores(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.cols() {
            return Err(Error::ShapeMismatch(format!(
                "SLDA expects {} features, got {}",
                self.weights.cols(),
                x.cols()
            )));
        }
        let c = self.class_ids.len();
        let mut out = Vec::with_capacity(x.rows() * c);
        let mut xf = vec![0.0; x.cols()];
        for row in x.row_iter() {
            for (d, &v) in xf.iter_mut().zip(row) {
                *d = f64::from(v);
            }
            out.extend((0..c).map(|k| dot(&xf, self.weights.row(k)) + self.bias[k]));
        }
        Ok(out)
    }
}

impl Predictor for SldaClassifier {
    fn predict(&self, x: &DenseMatrix) -> Result<Vec<u32>> {
        let scores = self.scores(x)?;
        Ok(scores
            .chunks_exact(self.class_ids.len())
            .map(|row| argmax_lowest_id(&self.class_ids, row))
            .collect())
    }
}

pub fn slda_update(mut state: SldaState, x: &[f32], y: u32) -> Result<SldaState> {
    state.update_one(x, y)?;
    Ok(state)
}

pub fn slda_predict(state: &SldaState, x: &DenseMatrix) -> Result<Vec<u32>> {
    state.classifier()?.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::NmcModel;

    fn m(rows: &[[f32; 3]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn first_sample_leaves_covariance_unchanged() {
        let mut s = SldaState::new(3, 1e-4).unwrap();
        s.update_one(&[1.0, 2.0, 3.0], 0).unwrap();
        assert!(s.covariance().data().iter().all(|v| *v == 0.0));
        s.update_one(&[3.0, 2.0, 1.0], 0).unwrap();
        let before = s.covariance();
        s.update_one(&[9.0, -9.0, 0.5], 4).unwrap();
        // Same scatter, one more sample in the denominator.
        let mut expect = before;
        expect.scale(2.0 / 3.0);
        assert!(s.covariance().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn matches_class_centered_batch_covariance() {
        let x = m(&[
            [1.0, 0.0, 2.0],
            [3.0, 1.0, -1.0],
            [0.5, 0.5, 0.5],
            [-2.0, 4.0, 1.0],
            [0.0, 1.0, 3.0],
            [2.0, 2.0, 2.0],
        ]);
        let y = [0, 1, 0, 1, 0, 1];
        let mut s = SldaState::new(3, 1e-4).unwrap();
        s.update(&x, &y).unwrap();

        let mut batch = Matrix64::zeros(3, 3);
        for class in [0u32, 1] {
            let rows: Vec<usize> = (0..6).filter(|&i| y[i] == class).collect();
            let mu: Vec<f64> = (0..3)
                .map(|j| rows.iter().map(|&i| f64::from(x.row(i)[j])).sum::<f64>() / 3.0)
                .collect();
            assert!(s
                .mean(class)
                .unwrap()
                .iter()
                .zip(&mu)
                .all(|(a, b)| (a - b).abs() < 1e-15));
            for &i in &rows {
                for a in 0..3 {
                    for b in 0..3 {
                        batch[(a, b)] +=
                            (f64::from(x.row(i)[a]) - mu[a]) * (f64::from(x.row(i)[b]) - mu[b]);
                    }
                }
            }
        }
        batch.scale(1.0 / 6.0);
        assert!(s.covariance().max_abs_diff(&batch) < 1e-12);
    }

    #[test]
    fn identity_covariance_agrees_with_nmc() {
        let x = m(&[
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 1.0],
            [0.0, 3.0, -1.0],
            [1.0, 1.0, 1.0],
        ]);
        let y = [7, 2, 5, 7];
        // Σ = anything, ε = 1 → Σ_ε = I.
        let mut s = SldaState::new(3, 1.0).unwrap();
        s.update(&x, &y).unwrap();
        let mut nmc = NmcModel::new(3);
        nmc.update(&x, &y).unwrap();
        let queries = m(&[
            [0.5, 0.5, 0.5],
            [1.0, 1.5, 0.0],
            [3.0, -1.0, 2.0],
            [0.25, 0.25, 0.25],
        ]);
        assert_eq!(
            slda_predict(&s, &queries).unwrap(),
            nmc.predict(&queries).unwrap()
        );
    }

    #[test]
    fn needs_two_classes_and_valid_shrinkage() {
        let s = slda_update(SldaState::new(3, 1e-4).unwrap(), &[1.0, 1.0, 1.0], 0).unwrap();
        assert!(matches!(s.classifier(), Err(Error::EmptyModel(_))));
        assert!(SldaState::new(3, 0.0).is_err());
        assert!(SldaState::new(3, 1.5).is_err());
        let mut s = s;
        assert!(matches!(
            s.update_one(&[1.0], 0),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
