//! One-hidden-layer ReLU MLP with a single growing class-incremental head,
//! trained by mini-batch SGD with momentum on softmax cross-entropy.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{argmax_lowest_id, Predictor};
use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;
use crate::replay::{EpochBuilder, EpochSample};
use crate::seed;

pub const DEFAULT_HIDDEN: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Cosine decay of the learning rate to zero over the task.
    pub anneal: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 0.0,
            anneal: false,
            epochs: 10,
            batch_size: 64,
            momentum: 0.9,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::BadConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::BadConfig(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::BadConfig("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::BadConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }

    fn lr_at(&self, step: usize, total: usize) -> f64 {
        if self.anneal && total > 0 {
            let progress = step as f64 / total as f64;
            0.5 * self.learning_rate * (1.0 + (std::f64::consts::PI * progress).cos())
        } else {
            self.learning_rate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

/// Parameter tensors, in the order `w1, b1, w2, b2`.
///
/// `w1` is `d x h` row-major (one row per input feature); `w2` is `C x h`
/// (one row per head class).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpParams {
    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn zeros_like(&self) -> Self {
        Self {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    spec: MlpSpec,
    seed: u64,
    params: MlpParams,
    /// Global class id of each head row.
    class_ids: Vec<u32>,
}

fn he_normal(rng: &mut impl Rng, fan_in: usize, out: &mut Vec<f64>, count: usize) {
    let std = (2.0 / fan_in as f64).sqrt();
    out.extend((0..count).map(|_| std * rng.sample::<f64, _>(StandardNormal)));
}

impl MlpModel {
    /// Fresh parameters: He-normal weights, zero biases, empty head.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        if spec.input_dim == 0 || spec.hidden == 0 {
            return Err(Error::BadConfig(format!(
                "MLP dimensions must be positive, got {spec:?}"
            )));
        }
        let mut w1 = Vec::with_capacity(spec.input_dim * spec.hidden);
        he_normal(
            &mut seed::rng(seed, &[0x1a7e]),
            spec.input_dim,
            &mut w1,
            spec.input_dim * spec.hidden,
        );
        Ok(Self {
            spec,
            seed,
            params: MlpParams {
                w1,
                b1: vec![0.0; spec.hidden],
                w2: Vec::new(),
                b2: Vec::new(),
            },
            class_ids: Vec::new(),
        })
    }

    pub fn spec(&self) -> MlpSpec {
        self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut MlpParams {
        &mut self.params
    }

    /// Appends one head row per new class. Each row is drawn from a generator
    /// keyed by the model seed and the class id, so the result does not depend
    /// on how expansions are batched. Existing rows are untouched.
    pub fn expand_head(&mut self, new_class_ids: &[u32]) -> Result<()> {
        for (i, c) in new_class_ids.iter().enumerate() {
            if self.class_ids.contains(c) || new_class_ids[..i].contains(c) {
                return Err(Error::DuplicateClass(*c));
            }
        }
        let h = self.spec.hidden;
        for &c in new_class_ids {
            let mut rng = seed::rng(self.seed, &[0x4ead, u64::from(c)]);
            he_normal(&mut rng, h, &mut self.params.w2, h);
            self.params.b2.push(0.0);
            self.class_ids.push(c);
        }
        Ok(())
    }

    fn head_index(&self) -> BTreeMap<u32, usize> {
        self.class_ids
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i))
            .collect()
    }

    /// Logits for every row of `x`, `rows x C` row-major.
    pub fn logits(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        self.check_dim(x.cols())?;
        let mut ws = Workspace::new(&self.spec, self.n_classes(), 0);
        let c = self.n_classes();
        let mut out = Vec::with_capacity(x.rows() * c);
        for start in (0..x.rows()).step_by(256) {
            let end = (start + 256).min(x.rows());
            ws.load_rows((start..end).map(|i| x.row(i)), self.spec.input_dim);
            self.forward(&mut ws);
            out.extend_from_slice(&ws.logits[..(end - start) * c]);
        }
        Ok(out)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.spec.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} features, got {d}",
                self.spec.input_dim
            )));
        }
        Ok(())
    }

    /// Forward pass over the `ws.batch` rows loaded in `ws.x`.
    fn forward(&self, ws: &mut Workspace) {
        let (d, h, c) = (self.spec.input_dim, self.spec.hidden, self.n_classes());
        let p = &self.params;
        ws.logits.resize(ws.batch * c, 0.0);
        for b in 0..ws.batch {
            let z = &mut ws.z1[b * h..(b + 1) * h];
            z.copy_from_slice(&p.b1);
            let x = &ws.x[b * d..(b + 1) * d];
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let w = &p.w1[i * h..(i + 1) * h];
                for (zj, &wj) in z.iter_mut().zip(w) {
                    *zj += xi * wj;
                }
            }
            let a = &mut ws.a1[b * h..(b + 1) * h];
            for (aj, &zj) in a.iter_mut().zip(z.iter()) {
                *aj = zj.max(0.0);
            }
            let logits = &mut ws.logits[b * c..(b + 1) * c];
            for (k, l) in logits.iter_mut().enumerate() {
                let w = &p.w2[k * h..(k + 1) * h];
                *l = p.b2[k] + a.iter().zip(w).map(|(x, y)| x * y).sum::<f64>();
            }
        }
    }

    /// Mean softmax cross-entropy of the loaded batch; leaves
    /// `(softmax - onehot) / batch` in `ws.logits`.
    fn loss_and_dlogits(&self, ws: &mut Workspace) -> f64 {
        let c = self.n_classes();
        let inv = 1.0 / ws.batch as f64;
        let mut loss = 0.0;
        for b in 0..ws.batch {
            let row = &mut ws.logits[b * c..(b + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            let t = ws.targets[b];
            loss += sum.ln() - (row[t].ln());
            for v in row.iter_mut() {
                *v = *v / sum * inv;
            }
            row[t] -= inv;
        }
        loss * inv
    }

    /// Accumulates parameter gradients of the batch into `grads` (zeroed
    /// first). Requires `forward` and `loss_and_dlogits` to have run.
    fn backward(&self, ws: &mut Workspace, grads: &mut MlpParams) {
        let (d, h, c) = (self.spec.input_dim, self.spec.hidden, self.n_classes());
        let p = &self.params;
        grads.fill_zero();
        for b in 0..ws.batch {
            let dl = &ws.logits[b * c..(b + 1) * c];
            let a = &ws.a1[b * h..(b + 1) * h];
            let da = &mut ws.da1[..h];
            da.iter_mut().for_each(|v| *v = 0.0);
            for (k, &g) in dl.iter().enumerate() {
                grads.b2[k] += g;
                let gw = &mut grads.w2[k * h..(k + 1) * h];
                for (gj, &aj) in gw.iter_mut().zip(a) {
                    *gj += g * aj;
                }
                let w = &p.w2[k * h..(k + 1) * h];
                for (dj, &wj) in da.iter_mut().zip(w) {
                    *dj += g * wj;
                }
            }
            let z = &ws.z1[b * h..(b + 1) * h];
            for (dj, &zj) in da.iter_mut().zip(z) {
                if zj <= 0.0 {
                    *dj = 0.0;
                }
            }
            for (gb, &dj) in grads.b1.iter_mut().zip(da.iter()) {
                *gb += dj;
            }
            let x = &ws.x[b * d..(b + 1) * d];
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let gw = &mut grads.w1[i * h..(i + 1) * h];
                for (gj, &dj) in gw.iter_mut().zip(da.iter()) {
                    *gj += xi * dj;
                }
            }
        }
    }

    fn batch_workspace(&self, x: &DenseMatrix, targets: &[u32]) -> Result<Workspace> {
        self.check_dim(x.cols())?;
        if targets.len() != x.rows() || x.rows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} rows with {} targets",
                x.rows(),
                targets.len()
            )));
        }
        let index = self.head_index();
        let mut ws = Workspace::new(&self.spec, self.n_classes(), x.rows());
        ws.load_rows(x.row_iter(), self.spec.input_dim);
        ws.targets = targets
            .iter()
            .map(|t| index.get(t).copied().ok_or(Error::UnknownClass(*t)))
            .collect::<Result<_>>()?;
        Ok(ws)
    }

    /// Mean cross-entropy of `x` against global class ids `targets`.
    pub fn loss(&self, x: &DenseMatrix, targets: &[u32]) -> Result<f64> {
        let mut ws = self.batch_workspace(x, targets)?;
        self.forward(&mut ws);
        Ok(self.loss_and_dlogits(&mut ws))
    }

    /// Mean cross-entropy and its analytic gradient.
    pub fn loss_and_gradient(&self, x: &DenseMatrix, targets: &[u32]) -> Result<(f64, MlpParams)> {
        let mut ws = self.batch_workspace(x, targets)?;
        self.forward(&mut ws);
        let loss = self.loss_and_dlogits(&mut ws);
        let mut grads = self.params.zeros_like();
        self.backward(&mut ws, &mut grads);
        Ok((loss, grads))
    }

    /// Trains on `hp.epochs` freshly drawn balanced epochs.
    pub fn train_task(
        &mut self,
        epochs: &EpochBuilder<'_>,
        hp: &Hyperparams,
        seed: u64,
    ) -> Result<TrainReport> {
        hp.validate()?;
        self.check_dim(epochs.task().dim())?;
        let index = self.head_index();
        if let Some(c) = epochs
            .classes()
            .into_iter()
            .find(|c| !index.contains_key(c))
        {
            return Err(Error::UnknownClass(c));
        }

        let draws: Vec<Vec<EpochSample>> = (0..hp.epochs)
            .map(|e| epochs.build(seed::derive(seed, &[0xe9, e as u64])))
            .collect::<Result<_>>()?;
        let batch = hp.batch_size;
        let total_steps: usize = draws.iter().map(|d| d.len().div_ceil(batch)).sum();

        let mut ws = Workspace::new(&self.spec, self.n_classes(), batch);
        let mut grads = self.params.zeros_like();
        let mut velocity = self.params.zeros_like();
        let mut report = TrainReport::default();
        let mut step = 0;
        for epoch in &draws {
            let mut epoch_loss = 0.0;
            for chunk in epoch.chunks(batch) {
                ws.batch = chunk.len();
                ws.load_rows(
                    chunk.iter().map(|s| epochs.features(s)),
                    self.spec.input_dim,
                );
                ws.targets.clear();
                ws.targets.extend(chunk.iter().map(|s| index[&s.class]));
                self.forward(&mut ws);
                let loss = self.loss_and_dlogits(&mut ws);
                if !loss.is_finite() {
                    return Err(Error::DivergedTraining { step, loss });
                }
                epoch_loss += loss * chunk.len() as f64;
                self.backward(&mut ws, &mut grads);
                self.sgd_step(&grads, &mut velocity, hp, hp.lr_at(step, total_steps));
                step += 1;
            }
            if !self.params.all_finite() {
                return Err(Error::DivergedTraining {
                    step,
                    loss: f64::NAN,
                });
            }
            report.epoch_losses.push(epoch_loss / epoch.len() as f64);
        }
        report.steps = step;
        Ok(report)
    }

    fn sgd_step(&mut self, grads: &MlpParams, velocity: &mut MlpParams, hp: &Hyperparams, lr: f64) {
        let decay = 1.0 - lr * hp.weight_decay;
        let params = self.params.tensors_mut();
        let grads = grads.tensors();
        let vel = velocity.tensors_mut();
        for (t, ((p, g), v)) in params.into_iter().zip(grads).zip(vel).enumerate() {
            // Decoupled decay on the weight matrices only.
            let weights = t % 2 == 0;
            for ((pi, &gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = hp.momentum * *vi + gi;
                if weights {
                    *pi *= decay;
                }
                *pi -= lr * *vi;
            }
        }
    }
}

impl Predictor for MlpModel {
    /// Argmax over the head, ties broken towards the lowest class id.
    fn predict(&self, x: &DenseMatrix) -> Result<Vec<u32>> {
        if self.class_ids.is_empty() {
            return Err(Error::EmptyModel("MLP head has no classes".into()));
        }
        let logits = self.logits(x)?;
        Ok(logits
            .chunks_exact(self.n_classes())
            .map(|row| argmax_lowest_id(&self.class_ids, row))
            .collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Sample-weighted mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

struct Workspace {
    batch: usize,
    x: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    da1: Vec<f64>,
    logits: Vec<f64>,
    targets: Vec<usize>,
}

impl Workspace {
    fn new(spec: &MlpSpec, classes: usize, batch: usize) -> Self {
        Self {
            batch,
            x: Vec::with_capacity(batch * spec.input_dim),
            z1: Vec::with_capacity(batch * spec.hidden),
            a1: Vec::with_capacity(batch * spec.hidden),
            da1: vec![0.0; spec.hidden],
            logits: Vec::with_capacity(batch * classes),
            targets: Vec::with_capacity(batch),
        }
    }

    fn load_rows<'r>(&mut self, rows: impl Iterator<Item = &'r [f32]>, d: usize) {
        self.x.clear();
        for r in rows {
            self.x.extend(r.iter().map(|&v| f64::from(v)));
        }
        self.batch = self.x.len() / d;
        let h = self.da1.len();
        self.z1.resize(self.batch * h, 0.0);
        self.a1.resize(self.batch * h, 0.0);
    }
}

/// Fresh parameters for `spec`; equivalent to [`MlpModel::init`].
pub fn mlp_reinit(spec: MlpSpec, seed: u64) -> Result<MlpModel> {
    MlpModel::init(spec, seed)
}

pub fn mlp_expand_head(mut model: MlpModel, new_class_ids: &[u32]) -> Result<MlpModel> {
    model.expand_head(new_class_ids)?;
    Ok(model)
}

pub fn mlp_train_task(
    model: &mut MlpModel,
    epochs: &EpochBuilder<'_>,
    hp: &Hyperparams,
    seed: u64,
) -> Result<TrainReport> {
    model.train_task(epochs, hp, seed)
}

pub fn mlp_predict(model: &MlpModel, x: &DenseMatrix) -> Result<Vec<u32>> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::accuracy;
    use crate::replay::ReplayBuffer;
    use crate::synth::{generate_synthetic, SynthConfig};

    fn tiny(d: usize, h: usize, classes: &[u32], seed: u64) -> MlpModel {
        let mut m = MlpModel::init(
            MlpSpec {
                input_dim: d,
                hidden: h,
            },
            seed,
        )
        .unwrap();
        m.expand_head(classes).unwrap();
        m
    }

    #[test]
    fn expansion_keeps_old_logits_and_is_deterministic() {
        let x = DenseMatrix::from_rows(&[[0.3f32, -1.0, 2.0], [1.0, 1.0, -0.5]]).unwrap();
        let mut m = tiny(3, 5, &[0, 1], 1);
        let before = m.logits(&x).unwrap();
        m.expand_head(&[2, 3]).unwrap();
        let after = m.logits(&x).unwrap();
        for r in 0..2 {
            assert_eq!(&before[r * 2..r * 2 + 2], &after[r * 4..r * 4 + 2]);
        }
        let mut again = tiny(3, 5, &[0, 1], 1);
        again.expand_head(&[2]).unwrap();
        again.expand_head(&[3]).unwrap();
        assert_eq!(again, m);

        let snapshot = m.clone();
        m.expand_head(&[]).unwrap();
        assert_eq!(m, snapshot);
        assert!(matches!(m.expand_head(&[1]), Err(Error::DuplicateClass(1))));
        assert!(matches!(
            m.expand_head(&[7, 7]),
            Err(Error::DuplicateClass(7))
        ));
    }

    #[test]
    fn reinit_is_seeded() {
        let spec = MlpSpec {
            input_dim: 4,
            hidden: 6,
        };
        assert_eq!(mlp_reinit(spec, 5).unwrap(), mlp_reinit(spec, 5).unwrap());
        assert_ne!(mlp_reinit(spec, 5).unwrap(), mlp_reinit(spec, 6).unwrap());
    }

    #[test]
    fn zero_head_predicts_lowest_class() {
        let mut m = tiny(2, 4, &[3, 1, 2], 0);
        m.params_mut().w2.iter_mut().for_each(|v| *v = 0.0);
        let x = DenseMatrix::from_rows(&[[1.0f32, 2.0], [-3.0, 0.5]]).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![1, 1]);
    }

    #[test]
    fn wrong_dimension() {
        let m = tiny(3, 4, &[0], 0);
        let x = DenseMatrix::zeros(2, 4);
        assert!(matches!(m.predict(&x), Err(Error::ShapeMismatch(_))));
    }

    fn toy() -> crate::EncodedDataset {
        let mut cfg = SynthConfig::new(16, 2, 40, 0.0, 0.05);
        cfg.seed = 3;
        generate_synthetic(&cfg).unwrap()
    }

    #[test]
    fn separable_toy_trains_to_perfect_accuracy() {
        let ds = toy();
        let mut m = tiny(16, 32, &[0, 1], 2);
        let buf = ReplayBuffer::new(0);
        let hp = Hyperparams {
            epochs: 5,
            batch_size: 8,
            ..Hyperparams::default()
        };
        let report = m.train_task(&EpochBuilder::new(&ds, &buf), &hp, 9).unwrap();
        for w in report.epoch_losses.windows(2) {
            assert!(
                w[1] < w[0],
                "loss not decreasing: {:?}",
                report.epoch_losses
            );
        }
        assert_eq!(accuracy(&m, &ds).unwrap(), 1.0);

        let mut again = tiny(16, 32, &[0, 1], 2);
        again
            .train_task(&EpochBuilder::new(&ds, &buf), &hp, 9)
            .unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn untrained_class_in_epoch_is_rejected() {
        let ds = toy();
        let mut m = tiny(16, 8, &[0], 2);
        let buf = ReplayBuffer::new(0);
        let r = m.train_task(&EpochBuilder::new(&ds, &buf), &Hyperparams::default(), 0);
        assert!(matches!(r, Err(Error::UnknownClass(1))));
    }

    #[test]
    fn divergence_is_reported() {
        let ds = toy();
        let mut m = tiny(16, 32, &[0, 1], 2);
        let buf = ReplayBuffer::new(0);
        let hp = Hyperparams {
            learning_rate: 1e200,
            epochs: 20,
            ..Hyperparams::default()
        };
        let r = m.train_task(&EpochBuilder::new(&ds, &buf), &hp, 0);
        assert!(matches!(r, Err(Error::DivergedTraining { .. })), "{r:?}");
    }

    #[test]
    fn cosine_schedule() {
        let hp = Hyperparams {
            learning_rate: 1.0,
            anneal: true,
            ..Hyperparams::default()
        };
        assert_eq!(hp.lr_at(0, 10), 1.0);
        assert!((hp.lr_at(5, 10) - 0.5).abs() < 1e-12);
        assert!(hp.lr_at(10, 10).abs() < 1e-12);
        let flat = Hyperparams::default();
        assert_eq!(flat.lr_at(7, 10), flat.learning_rate);
    }
}
