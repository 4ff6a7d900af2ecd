//! Replay MLP, nearest-mean and streaming LDA classifiers over latent features.

mod mlp;
mod nmc;
mod slda;
mod tune;

pub use mlp::{
    mlp_expand_head, mlp_predict, mlp_reinit, mlp_train_task, Hyperparams, MlpModel, MlpParams,
    MlpSpec, TrainReport, DEFAULT_HIDDEN,
};
pub use nmc::{nmc_predict, nmc_update, NmcModel};
pub use slda::{slda_predict, slda_update, SldaClassifier, SldaState, DEFAULT_SHRINKAGE};
pub use tune::{default_grid, tune_first_task, TuneOutcome};

use crate::error::{Error, Result};
use crate::featurestore::EncodedDataset;
use crate::numeric::DenseMatrix;

pub trait Predictor {
    fn predict(&self, x: &DenseMatrix) -> Result<Vec<u32>>;
}

/// Class of the highest score. `ids` and `scores` are parallel; among equal
/// scores the smallest id wins regardless of position.
pub fn argmax_lowest_id(ids: &[u32], scores: &[f64]) -> u32 {
    let mut best = (ids[0], scores[0]);
    for (&id, &s) in ids.iter().zip(scores).skip(1) {
        if s > best.1 || (s == best.1 && id < best.0) {
            best = (id, s);
        }
    }
    best.0
}

/// Fraction of rows of `ds` the predictor labels correctly.
pub fn accuracy(model: &impl Predictor, ds: &EncodedDataset) -> Result<f64> {
    Ok(correct_count(model, ds)? as f64 / ds.len() as f64)
}

pub fn correct_count(model: &impl Predictor, ds: &EncodedDataset) -> Result<usize> {
    if ds.is_empty() {
        return Err(Error::EmptyData);
    }
    let pred = model.predict(ds.features())?;
    Ok(pred.iter().zip(ds.labels()).filter(|(p, l)| p == l).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_prefer_lowest_id() {
        assert_eq!(argmax_lowest_id(&[5, 2, 9], &[1.0, 1.0, 0.5]), 2);
        assert_eq!(argmax_lowest_id(&[5, 2, 9], &[1.0, 1.0, 3.0]), 9);
        assert_eq!(argmax_lowest_id(&[4], &[-1.0]), 4);
    }
}
