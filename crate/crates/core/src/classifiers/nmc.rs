//! Nearest-mean classifier: one running prototype per class.

use std::collections::BTreeMap;

use super::{argmax_lowest_id, Predictor};
use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
struct ClassSum {
    sum: Vec<f64>,
    count: u64,
}

/// Prototypes are kept as exact 64-bit sums so chunked and single-shot
/// updates over the same row order give bit-identical means.
#[derive(Debug, Clone, PartialEq)]
pub struct NmcModel {
    dim: usize,
    classes: BTreeMap<u32, ClassSum>,
}

impl NmcModel {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            classes: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_ids(&self) -> Vec<u32> {
        self.classes.keys().copied().collect()
    }

    pub fn count(&self, class: u32) -> u64 {
        self.classes.get(&class).map_or(0, |c| c.count)
    }

    pub fn mean(&self, class: u32) -> Option<Vec<f64>> {
        let c = self.classes.get(&class)?;
        Some(c.sum.iter().map(|s| s / c.count as f64).collect())
    }

    pub fn means(&self) -> BTreeMap<u32, Vec<f64>> {
        self.classes
            .keys()
            .map(|&c| (c, self.mean(c).expect("present")))
            .collect()
    }

    pub fn update_one(&mut self, x: &[f32], y: u32) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "NMC expects {} features, got {}",
                self.dim,
                x.len()
            )));
        }
        let entry = self.classes.entry(y).or_insert_with(|| ClassSum {
            sum: vec![0.0; x.len()],
            count: 0,
        });
        for (s, &v) in entry.sum.iter_mut().zip(x) {
            *s += f64::from(v);
        }
        entry.count += 1;
        Ok(())
    }

    pub fn update(&mut self, x: &DenseMatrix, y: &[u32]) -> Result<()> {
        if x.cols() != self.dim || x.rows() != y.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} rows with {} labels for a {}-d NMC",
                x.rows(),
                x.cols(),
                y.len(),
                self.dim
            )));
        }
        for (row, &label) in x.row_iter().zip(y) {
            self.update_one(row, label)?;
        }
        Ok(())
    }
}

impl Predictor for NmcModel {
    /// Nearest prototype in Euclidean distance, ties to the lowest class id.
    fn predict(&self, x: &DenseMatrix) -> Result<Vec<u32>> {
        if self.classes.is_empty() {
            return Err(Error::EmptyModel("NMC has no classes".into()));
        }
        if x.cols() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "NMC expects {} features, got {}",
                self.dim,
                x.cols()
            )));
        }
        let means = self.means();
        let ids: Vec<u32> = means.keys().copied().collect();
        let mut neg_dist = vec![0.0; ids.len()];
        Ok(x.row_iter()
            .map(|row| {
                for (nd, mu) in neg_dist.iter_mut().zip(means.values()) {
                    *nd = -row
                        .iter()
                        .zip(mu)
                        .map(|(&a, m)| (f64::from(a) - m).powi(2))
                        .sum::<f64>();
                }
                argmax_lowest_id(&ids, &neg_dist)
            })
            .collect())
    }
}

pub fn nmc_update(mut model: NmcModel, x: &DenseMatrix, y: &[u32]) -> Result<NmcModel> {
    model.update(x, y)?;
    Ok(model)
}

pub fn nmc_predict(model: &NmcModel, x: &DenseMatrix) -> Result<Vec<u32>> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[[f32; 2]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn nearest_mean_and_ties() {
        let nmc = nmc_update(
            NmcModel::new(2),
            &m(&[[0.0, 0.0], [0.0, 2.0], [4.0, 0.0], [4.0, 2.0]]),
            &[0, 0, 1, 1],
        )
        .unwrap();
        assert_eq!(nmc.mean(0).unwrap(), vec![0.0, 1.0]);
        assert_eq!(nmc_predict(&nmc, &m(&[[1.0, 1.0]])).unwrap(), vec![0]);
        assert_eq!(nmc_predict(&nmc, &m(&[[2.0, 5.0]])).unwrap(), vec![0]);
        assert_eq!(nmc_predict(&nmc, &m(&[[3.5, 1.0]])).unwrap(), vec![1]);
    }

    #[test]
    fn chunked_updates_match_single_shot() {
        let rows = m(&[
            [0.1, 0.7],
            [1.3, -2.2],
            [0.5, 0.25],
            [9.0, 1.0 / 3.0],
            [-4.4, 0.01],
        ]);
        let labels = [2, 2, 5, 2, 5];
        let once = nmc_update(NmcModel::new(2), &rows, &labels).unwrap();
        let first = rows.select_rows(&[0, 1]);
        let second = rows.select_rows(&[2, 3, 4]);
        let chunked = nmc_update(
            nmc_update(NmcModel::new(2), &first, &labels[..2]).unwrap(),
            &second,
            &labels[2..],
        )
        .unwrap();
        assert_eq!(once, chunked);
        assert_eq!(once.count(2), 3);
    }

    #[test]
    fn empty_and_wrong_dim() {
        let nmc = NmcModel::new(2);
        assert!(matches!(
            nmc.predict(&m(&[[0.0, 0.0]])),
            Err(Error::EmptyModel(_))
        ));
        let nmc = nmc_update(nmc, &m(&[[1.0, 1.0]]), &[0]).unwrap();
        assert!(matches!(
            nmc.predict(&DenseMatrix::zeros(1, 3)),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
