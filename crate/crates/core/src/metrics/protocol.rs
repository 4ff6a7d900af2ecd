use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{final_cl_accuracy, AccuracyMatrix};
use crate::classifiers::{correct_count, Hyperparams, MlpModel, MlpSpec, NmcModel, SldaState};
use crate::error::{Error, Result};
use crate::featurestore::EncodedDataset;
use crate::replay::{EpochBuilder, ReplayBuffer};
use crate::seed;
use crate::streams::Stream;

pub const FEW_SHOT_PER_CLASS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpSetup {
    pub spec: MlpSpec,
    /// Hyperparameters per task; the last entry covers any later tasks.
    pub hyperparams: Vec<Hyperparams>,
    /// Full-batch epochs for the few-shot protocol.
    pub few_shot_epochs: usize,
}

impl MlpSetup {
    pub fn new(spec: MlpSpec, hp: Hyperparams) -> Self {
        Self {
            spec,
            hyperparams: vec![hp],
            few_shot_epochs: 20,
        }
    }

    pub fn hp_for(&self, task: usize) -> &Hyperparams {
        &self.hyperparams[task.min(self.hyperparams.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSpec {
    Mlp(MlpSetup),
    Nmc,
    Slda { shrinkage: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Cl,
    ClReinit,
    TaskIid,
    Iid,
    FewShot,
}

enum Learner {
    Mlp(MlpModel),
    Nmc(NmcModel),
    Slda(SldaState),
}

impl Learner {
    fn fresh(spec: &ClassifierSpec, dim: usize, seed: u64) -> Result<Self> {
        Ok(match spec {
            ClassifierSpec::Mlp(setup) => {
                if setup.hyperparams.is_empty() {
                    return Err(Error::BadConfig("MLP setup has no hyperparameters".into()));
                }
                Learner::Mlp(MlpModel::init(setup.spec, seed)?)
            }
            ClassifierSpec::Nmc => Learner::Nmc(NmcModel::new(dim)),
            ClassifierSpec::Slda { shrinkage } => Learner::Slda(SldaState::new(dim, *shrinkage)?),
        })
    }

    /// Learns `train` (plus `buffer` for the MLP). Metric classifiers take the
    /// rows one at a time in stored order and never replay.
    fn learn(
        &mut self,
        train: &EncodedDataset,
        buffer: &ReplayBuffer,
        hp: Option<&Hyperparams>,
        seed: u64,
    ) -> Result<()> {
        match self {
            Learner::Mlp(m) => {
                let new: Vec<u32> = train
                    .present_classes()
                    .into_iter()
                    .chain(buffer.classes())
                    .filter(|c| !m.class_ids().contains(c))
                    .collect();
                let mut new = new;
                new.sort_unstable();
                new.dedup();
                m.expand_head(&new)?;
                let hp = hp.expect("MLP learner needs hyperparameters");
                m.train_task(&EpochBuilder::new(train, buffer), hp, seed)?;
            }
            Learner::Nmc(m) => m.update(train.features(), train.labels())?,
            Learner::Slda(s) => s.update(train.features(), train.labels())?,
        }
        Ok(())
    }

    fn correct(&self, ds: &EncodedDataset) -> Result<usize> {
        match self {
            Learner::Mlp(m) => correct_count(m, ds),
            Learner::Nmc(m) => correct_count(m, ds),
            Learner::Slda(s) => match s.class_ids().as_slice() {
                // A lone class has no discriminant; every query gets it.
                [only] => Ok(ds.labels().iter().filter(|&&l| l == *only).count()),
                _ => correct_count(&s.classifier()?, ds),
            },
        }
    }
}

fn accuracy_of(learner: &Learner, ds: &EncodedDataset) -> Result<(usize, f64)> {
    let c = learner.correct(ds)?;
    Ok((c, c as f64 / ds.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClRun {
    pub matrix: AccuracyMatrix,
    /// Union-weighted accuracy over all test sets at stream end.
    pub a_cl: f64,
}

/// Sequential training over the stream. With `reinit` the MLP starts from
/// fresh weights before every task (the buffer is kept). The buffer receives
/// each task's training rows after that task is learned.
pub fn run_cl(
    stream: &Stream,
    spec: &ClassifierSpec,
    er_size: usize,
    reinit: bool,
    seed: u64,
) -> Result<ClRun> {
    let n = stream.n_tasks();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let dim = stream.tasks[0].train.dim();
    let mut learner = Learner::fresh(spec, dim, seed::derive(seed, &[0xc1]))?;
    let mut buffer = ReplayBuffer::new(er_size);
    let mut matrix = AccuracyMatrix::new(n);
    let mut final_correct = vec![0; n];
    for (t, task) in stream.tasks.iter().enumerate() {
        if reinit && t > 0 {
            learner = Learner::fresh(spec, dim, seed::derive(seed, &[0xc1, t as u64]))?;
        }
        let hp = match spec {
            ClassifierSpec::Mlp(setup) => Some(setup.hp_for(t)),
            _ => None,
        };
        learner.learn(
            &task.train,
            &buffer,
            hp,
            seed::derive(seed, &[0xc2, t as u64]),
        )?;
        if matches!(spec, ClassifierSpec::Mlp(_)) {
            buffer.update(&task.train, seed::derive(seed, &[0xb0, t as u64]))?;
        }
        for (i, earlier) in stream.tasks.iter().enumerate().take(t + 1) {
            let (correct, acc) = accuracy_of(&learner, &earlier.test)?;
            matrix.record(i, t, acc)?;
            if t == n - 1 {
                final_correct[i] = correct;
            }
        }
    }
    let sizes: Vec<usize> = stream.tasks.iter().map(|t| t.test.len()).collect();
    for (i, &s) in sizes.iter().enumerate() {
        matrix.set_test_size(i, s);
    }
    let a_cl = final_cl_accuracy(&final_correct, &sizes)?;
    Ok(ClRun { matrix, a_cl })
}

/// Mean over tasks of the accuracy of a fresh model trained on that task
/// alone, without replay.
pub fn run_task_iid(stream: &Stream, spec: &ClassifierSpec, seed: u64) -> Result<f64> {
    if stream.tasks.is_empty() {
        return Err(Error::EmptyData);
    }
    let empty = ReplayBuffer::new(0);
    let mut sum = 0.0;
    for (t, task) in stream.tasks.iter().enumerate() {
        let mut learner = Learner::fresh(
            spec,
            task.train.dim(),
            seed::derive(seed, &[0x71, t as u64]),
        )?;
        let hp = match spec {
            ClassifierSpec::Mlp(setup) => Some(setup.hp_for(t)),
            _ => None,
        };
        learner.learn(
            &task.train,
            &empty,
            hp,
            seed::derive(seed, &[0x72, t as u64]),
        )?;
        sum += accuracy_of(&learner, &task.test)?.1;
    }
    Ok(sum / stream.n_tasks() as f64)
}

/// One model on the union of all tasks, scored on the union of test sets.
pub fn run_iid(stream: &Stream, spec: &ClassifierSpec, seed: u64) -> Result<f64> {
    if stream.tasks.is_empty() {
        return Err(Error::EmptyData);
    }
    let trains: Vec<&EncodedDataset> = stream.tasks.iter().map(|t| &t.train).collect();
    let tests: Vec<&EncodedDataset> = stream.tasks.iter().map(|t| &t.test).collect();
    let train = EncodedDataset::vstack(&trains)?;
    let test = EncodedDataset::vstack(&tests)?;
    // Same seeds as the first task of `run_cl`: a one-task stream gives the
    // same model under both protocols.
    let mut learner = Learner::fresh(spec, train.dim(), seed::derive(seed, &[0xc1]))?;
    let hp = match spec {
        ClassifierSpec::Mlp(setup) => Some(setup.hp_for(0)),
        _ => None,
    };
    learner.learn(
        &train,
        &ReplayBuffer::new(0),
        hp,
        seed::derive(seed, &[0xc2, 0]),
    )?;
    Ok(accuracy_of(&learner, &test)?.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FewShotRun {
    /// Mean over tasks of the per-task test accuracy.
    pub accuracy: f64,
    /// Tasks with a class holding fewer than two training rows; those
    /// classes used every row they had.
    pub flagged_tasks: Vec<usize>,
}

/// Fresh model per task trained on `FEW_SHOT_PER_CLASS` seeded rows of each
/// class. The MLP runs `few_shot_epochs` full-batch epochs.
pub fn run_few_shot(stream: &Stream, spec: &ClassifierSpec, seed: u64) -> Result<FewShotRun> {
    if stream.tasks.is_empty() {
        return Err(Error::EmptyData);
    }
    let empty = ReplayBuffer::new(0);
    let mut sum = 0.0;
    let mut flagged_tasks = Vec::new();
    for (t, task) in stream.tasks.iter().enumerate() {
        let mut picked = Vec::new();
        let mut short = false;
        for (class, rows) in task.train.rows_by_class() {
            let mut rng = seed::rng(seed, &[0xf5, t as u64, u64::from(class)]);
            let take = FEW_SHOT_PER_CLASS.min(rows.len());
            short |= take < FEW_SHOT_PER_CLASS;
            picked.extend(
                index::sample(&mut rng, rows.len(), take)
                    .into_iter()
                    .map(|i| rows[i]),
            );
        }
        picked.sort_unstable();
        if short {
            log::warn!("few-shot task {t} has a class with fewer than {FEW_SHOT_PER_CLASS} rows");
            flagged_tasks.push(t);
        }
        let shots = task.train.select_rows(&picked);
        let hp = match spec {
            ClassifierSpec::Mlp(setup) => Some(Hyperparams {
                epochs: setup.few_shot_epochs,
                batch_size: shots.len(),
                ..setup.hp_for(t).clone()
            }),
            _ => None,
        };
        let mut learner = Learner::fresh(spec, shots.dim(), seed::derive(seed, &[0xf6, t as u64]))?;
        learner.learn(
            &shots,
            &empty,
            hp.as_ref(),
            seed::derive(seed, &[0xf7, t as u64]),
        )?;
        sum += accuracy_of(&learner, &task.test)?.1;
    }
    Ok(FewShotRun {
        accuracy: sum / stream.n_tasks() as f64,
        flagged_tasks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolResult {
    Sequential(ClRun),
    Scalar(f64),
    FewShot(FewShotRun),
}

pub fn run_protocol(
    stream: &Stream,
    spec: &ClassifierSpec,
    protocol: Protocol,
    er_size: usize,
    seed: u64,
) -> Result<ProtocolResult> {
    Ok(match protocol {
        Protocol::Cl => ProtocolResult::Sequential(run_cl(stream, spec, er_size, false, seed)?),
        Protocol::ClReinit => {
            ProtocolResult::Sequential(run_cl(stream, spec, er_size, true, seed)?)
        }
        Protocol::TaskIid => ProtocolResult::Scalar(run_task_iid(stream, spec, seed)?),
        Protocol::Iid => ProtocolResult::Scalar(run_iid(stream, spec, seed)?),
        Protocol::FewShot => ProtocolResult::FewShot(run_few_shot(stream, spec, seed)?),
    })
}
