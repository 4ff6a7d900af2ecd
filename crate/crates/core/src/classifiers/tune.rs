//! Validation-based hyperparameter selection on a single task.

use super::accuracy;
use super::mlp::{Hyperparams, MlpModel, MlpSpec};
use crate::error::{Error, Result};
use crate::featurestore::EncodedDataset;
use crate::replay::{EpochBuilder, ReplayBuffer};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: Hyperparams,
    pub best_index: usize,
    /// Validation accuracy per grid entry; `None` where training diverged.
    pub val_accuracy: Vec<Option<f64>>,
}

/// Learning rate x weight decay x annealing.
pub fn default_grid(epochs: usize) -> Vec<Hyperparams> {
    let mut grid = Vec::new();
    for learning_rate in [0.1, 0.01, 0.001] {
        for weight_decay in [0.0, 5e-4] {
            for anneal in [false, true] {
                grid.push(Hyperparams {
                    learning_rate,
                    weight_decay,
                    anneal,
                    epochs,
                    ..Hyperparams::default()
                });
            }
        }
    }
    grid
}

/// Trains one fresh model per grid entry on `train` (no replay) and keeps the
/// entry with the best accuracy on `val`. Every entry starts from the same
/// initialization and epoch draws. Diverged runs rank last; ties go to the
/// earliest entry.
pub fn tune_first_task(
    train: &EncodedDataset,
    val: &EncodedDataset,
    spec: MlpSpec,
    grid: &[Hyperparams],
    seed: u64,
) -> Result<TuneOutcome> {
    if grid.is_empty() {
        return Err(Error::BadConfig("hyperparameter grid is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::EmptyData);
    }
    let classes = train.present_classes();
    let empty = ReplayBuffer::new(0);
    let epochs = EpochBuilder::new(train, &empty);
    let mut val_accuracy = Vec::with_capacity(grid.len());
    for hp in grid {
        hp.validate()?;
        let mut model = MlpModel::init(spec, seed::derive(seed, &[0x70e]))?;
        model.expand_head(&classes)?;
        let acc = match model.train_task(&epochs, hp, seed::derive(seed, &[0x70f])) {
            Ok(_) => Some(accuracy(&model, val)?),
            Err(Error::DivergedTraining { step, loss }) => {
                log::info!("grid entry {hp:?} diverged at step {step} (loss {loss})");
                None
            }
            Err(e) => return Err(e),
        };
        val_accuracy.push(acc);
    }
    let mut best_index = 0;
    for (i, acc) in val_accuracy.iter().enumerate() {
        let better = match (acc, val_accuracy[best_index]) {
            (Some(a), Some(b)) => *a > b,
            (Some(_), None) => true,
            _ => false,
        };
        if better {
            best_index = i;
        }
    }
    Ok(TuneOutcome {
        best: grid[best_index].clone(),
        best_index,
        val_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic_split, SynthConfig};

    fn toy() -> crate::SplitDataset {
        let mut cfg = SynthConfig::new(16, 2, 40, 0.0, 0.05);
        cfg.test_samples_per_class = 10;
        cfg.seed = 4;
        generate_synthetic_split(&cfg, 0.25).unwrap()
    }

    fn hp(learning_rate: f64) -> Hyperparams {
        Hyperparams {
            learning_rate,
            epochs: 3,
            batch_size: 8,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn picks_non_diverging_entry() {
        let s = toy();
        let spec = MlpSpec {
            input_dim: 16,
            hidden: 16,
        };
        let out = tune_first_task(&s.train, &s.val, spec, &[hp(1e6), hp(0.01)], 1).unwrap();
        assert_eq!(out.best_index, 1);
        assert_eq!(out.val_accuracy[0], None);
        assert_eq!(out.best, hp(0.01));
    }

    #[test]
    fn singleton_ties_and_empty() {
        let s = toy();
        let spec = MlpSpec {
            input_dim: 16,
            hidden: 16,
        };
        let one = tune_first_task(&s.train, &s.val, spec, &[hp(0.05)], 1).unwrap();
        assert_eq!(one.best, hp(0.05));
        // Identical entries score identically; the first wins.
        let tie = tune_first_task(&s.train, &s.val, spec, &[hp(0.01), hp(0.01)], 1).unwrap();
        assert_eq!(tie.best_index, 0);
        assert!(matches!(
            tune_first_task(&s.train, &s.val, spec, &[], 1),
            Err(Error::BadConfig(_))
        ));
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid(7);
        assert_eq!(g.len(), 12);
        assert!(g.iter().all(|h| h.epochs == 7 && h.validate().is_ok()));
    }
}
