//! Analytic FLOP model for latent replay, end-to-end replay and the metric
//! classifiers. One multiply-accumulate counts as 2 flops; a backward pass
//! costs twice the forward pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BACKWARD_MULTIPLIER: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Flops of one encoder forward pass on one sample.
    pub c_enc: f64,
    /// Latent dimension.
    pub n_z: usize,
    pub hidden: usize,
    pub backward_multiplier: f64,
}

impl CostModel {
    pub fn new(c_enc: f64, n_z: usize, hidden: usize) -> Self {
        Self {
            c_enc,
            n_z,
            hidden,
            backward_multiplier: BACKWARD_MULTIPLIER,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c_enc.is_finite() && self.c_enc >= 0.0)
            || !(self.backward_multiplier.is_finite() && self.backward_multiplier >= 0.0)
        {
            return Err(Error::BadConfig(format!("invalid cost model {self:?}")));
        }
        Ok(())
    }
}

/// `(forward, train_step)` flops of the MLP head for one sample.
pub fn mlp_flops_per_sample(d: usize, h: usize, c: usize) -> (f64, f64) {
    let forward = 2.0 * (d as f64 * h as f64 + h as f64 * c as f64);
    (forward, forward * (1.0 + BACKWARD_MULTIPLIER))
}

fn train_step(cost: &CostModel, classes: usize) -> f64 {
    let (forward, _) = mlp_flops_per_sample(cost.n_z, cost.hidden, classes);
    forward * (1.0 + cost.backward_multiplier)
}

/// One task of a stream as seen by the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskLoad {
    /// Training samples introduced by the task.
    pub n_new: usize,
    /// Classes introduced by the task.
    pub classes: usize,
}

/// Equal-sized tasks: `n_tasks` tasks of `classes_per_task` classes with
/// `samples_per_class` rows each.
pub fn uniform_schedule(
    n_tasks: usize,
    classes_per_task: usize,
    samples_per_class: usize,
) -> Vec<TaskLoad> {
    vec![
        TaskLoad {
            n_new: classes_per_task * samples_per_class,
            classes: classes_per_task,
        };
        n_tasks
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSeries {
    pub per_task: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl CostSeries {
    fn from_per_task(per_task: Vec<f64>) -> Self {
        let cumulative = per_task
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        Self {
            per_task,
            cumulative,
        }
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Per task: `(epoch size, head classes)`. The epoch holds `s` samples of
/// every new class and, when replay is on, every buffered class, where `s`
/// is the new classes' per-class count (rounded up).
fn epoch_shapes(schedule: &[TaskLoad], er_size: usize) -> Result<Vec<(f64, usize)>> {
    let mut seen = 0;
    schedule
        .iter()
        .enumerate()
        .map(|(t, task)| {
            if task.classes == 0 {
                return Err(Error::BadConfig(format!("task {t} introduces no classes")));
            }
            let s = task.n_new.div_ceil(task.classes);
            let replayed = if er_size > 0 { seen } else { 0 };
            seen += task.classes;
            Ok(((s * (task.classes + replayed)) as f64, seen))
        })
        .collect()
}

/// Encoding every sample once, then training the head on latent epochs.
pub fn latent_er_cost(
    schedule: &[TaskLoad],
    epochs_per_task: usize,
    er_size: usize,
    cost: &CostModel,
) -> Result<CostSeries> {
    cost.validate()?;
    let shapes = epoch_shapes(schedule, er_size)?;
    let per_task = schedule
        .iter()
        .zip(shapes)
        .map(|(task, (epoch, classes))| {
            cost.c_enc * task.n_new as f64
                + epochs_per_task as f64 * epoch * train_step(cost, classes)
        })
        .collect();
    Ok(CostSeries::from_per_task(per_task))
}

/// Forward and backward through encoder and head for every epoch sample.
pub fn end2end_er_cost(
    schedule: &[TaskLoad],
    epochs_per_task: usize,
    er_size: usize,
    cost: &CostModel,
) -> Result<CostSeries> {
    cost.validate()?;
    let shapes = epoch_shapes(schedule, er_size)?;
    let per_task = shapes
        .into_iter()
        .map(|(epoch, classes)| {
            let per_sample =
                cost.c_enc * (1.0 + cost.backward_multiplier) + train_step(cost, classes);
            epochs_per_task as f64 * epoch * per_sample
        })
        .collect();
    Ok(CostSeries::from_per_task(per_task))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Nmc,
    Slda,
}

/// How the SLDA covariance accumulation term is read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SldaCovarianceTerm {
    /// `(3 · N_z · |D|)²`, as the formula is printed.
    #[default]
    Literal,
    /// `9 · N_z² · |D|`: one outer product per sample.
    Corrected,
}

/// Encoding `|D|` samples plus fitting the classifier over `n_classes`.
///
/// NMC: `C_enc·|D| + |D|·N_z + N_z·N_c`. SLDA adds the covariance term and
/// the `N_z³` inversion. An empty dataset costs nothing.
pub fn metric_classifier_cost(
    kind: MetricKind,
    n_samples: usize,
    n_classes: usize,
    cost: &CostModel,
    term: SldaCovarianceTerm,
) -> Result<f64> {
    cost.validate()?;
    if n_samples == 0 {
        return Ok(0.0);
    }
    let (n, nz, nc) = (n_samples as f64, cost.n_z as f64, n_classes as f64);
    let nmc = cost.c_enc * n + n * nz + nz * nc;
    Ok(match kind {
        MetricKind::Nmc => nmc,
        MetricKind::Slda => {
            let covariance = match term {
                SldaCovarianceTerm::Literal => (3.0 * nz * n).powi(2),
                SldaCovarianceTerm::Corrected => 9.0 * nz * nz * n,
            };
            nmc + covariance + slda_inversion_cost(cost.n_z)
        }
    })
}

/// `N_z³` flops for inverting the covariance.
pub fn slda_inversion_cost(n_z: usize) -> f64 {
    (n_z as f64).powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_flops() {
        assert_eq!(
            mlp_flops_per_sample(512, 1024, 100),
            (1_253_376.0, 3_760_128.0)
        );
        assert_eq!(mlp_flops_per_sample(1, 1, 1).0, 4.0);
    }

    #[test]
    fn encoding_only_without_epochs() {
        let cost = CostModel::new(1e10, 8, 4);
        let s = latent_er_cost(
            &[TaskLoad {
                n_new: 1000,
                classes: 10,
            }],
            0,
            0,
            &cost,
        )
        .unwrap();
        assert_eq!(s.total(), 1e13);
    }

    #[test]
    fn per_epoch_cost_grows_with_seen_classes() {
        let cost = CostModel::new(0.0, 16, 8);
        let sched = uniform_schedule(4, 2, 10);
        let s = latent_er_cost(&sched, 1, 5, &cost).unwrap();
        assert!(s.per_task.windows(2).all(|w| w[1] > w[0]));
        // No replay: every epoch has the same size, only the head grows.
        let flat = latent_er_cost(&sched, 1, 0, &cost).unwrap();
        assert!(flat.per_task[3] < s.per_task[3]);
    }

    #[test]
    fn end2end_single_epoch_and_degenerate() {
        let cost = CostModel::new(1e9, 16, 8);
        let task = [TaskLoad {
            n_new: 50,
            classes: 5,
        }];
        let e = end2end_er_cost(&task, 1, 0, &cost).unwrap();
        let (_, step) = mlp_flops_per_sample(16, 8, 5);
        assert_eq!(e.total(), 50.0 * (3e9 + step));

        let free = CostModel::new(0.0, 16, 8);
        let sched = uniform_schedule(3, 2, 7);
        assert_eq!(
            end2end_er_cost(&sched, 4, 3, &free).unwrap(),
            latent_er_cost(&sched, 4, 3, &free).unwrap()
        );
    }

    #[test]
    fn ratio_grows_with_epochs() {
        let cost = CostModel::new(1e9, 64, 32);
        let sched = uniform_schedule(3, 4, 20);
        let ratio = |e| {
            end2end_er_cost(&sched, e, 2, &cost).unwrap().total()
                / latent_er_cost(&sched, e, 2, &cost).unwrap().total()
        };
        assert!(ratio(1) < ratio(5) && ratio(5) < ratio(20));
    }

    #[test]
    fn metric_costs() {
        let cost = CostModel::new(100.0, 4, 1);
        let nmc =
            metric_classifier_cost(MetricKind::Nmc, 10, 2, &cost, SldaCovarianceTerm::Literal);
        assert_eq!(nmc.unwrap(), 1048.0);
        assert_eq!(
            metric_classifier_cost(MetricKind::Nmc, 0, 2, &cost, SldaCovarianceTerm::Literal)
                .unwrap(),
            0.0
        );
        let literal =
            metric_classifier_cost(MetricKind::Slda, 10, 2, &cost, SldaCovarianceTerm::Literal)
                .unwrap();
        let corrected = metric_classifier_cost(
            MetricKind::Slda,
            10,
            2,
            &cost,
            SldaCovarianceTerm::Corrected,
        )
        .unwrap();
        assert_eq!(literal, 1048.0 + 120.0 * 120.0 + 64.0);
        assert_eq!(corrected, 1048.0 + 9.0 * 16.0 * 10.0 + 64.0);
        assert_eq!(slda_inversion_cost(8192), 549_755_813_888.0);
    }
}
