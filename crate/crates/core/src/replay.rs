//! Per-class latent replay buffer and the class-balanced epoch sampler.
//!
//! Every epoch contains exactly `s` samples of every class it covers, where
//! `s` is the largest per-class count among the new task's classes. Buffered
//! classes are oversampled (cycled) when they hold fewer than `s` rows and
//! subsampled when they hold more, so new and replayed classes are drawn
//! with the same probability.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::featurestore::EncodedDataset;
use crate::numeric::DenseMatrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
struct ClassSlots {
    /// Row indices into the task training set the slots were copied from.
    source_rows: Vec<usize>,
    features: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity_per_class: usize,
    per_class: BTreeMap<u32, ClassSlots>,
}

impl ReplayBuffer {
    pub fn new(capacity_per_class: usize) -> Self {
        Self {
            capacity_per_class,
            per_class: BTreeMap::new(),
        }
    }

    pub fn capacity_per_class(&self) -> usize {
        self.capacity_per_class
    }

    /// Classes registered in the buffer, ascending (including ones with
    /// zero stored rows when the capacity is zero).
    pub fn classes(&self) -> Vec<u32> {
        self.per_class.keys().copied().collect()
    }

    pub fn contains(&self, class: u32) -> bool {
        self.per_class.contains_key(&class)
    }

    pub fn slots(&self, class: u32) -> Option<&DenseMatrix> {
        self.per_class.get(&class).map(|s| &s.features)
    }

    /// Task-local row indices the slots of `class` were copied from.
    pub fn source_rows(&self, class: u32) -> Option<&[usize]> {
        self.per_class.get(&class).map(|s| s.source_rows.as_slice())
    }

    pub fn len(&self) -> usize {
        self.per_class.values().map(|s| s.features.rows()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores `min(m, available)` rows of every class of `task_train`,
    /// chosen uniformly without replacement. Fails without modifying the
    /// buffer if any class is already present.
    pub fn update(&mut self, task_train: &EncodedDataset, seed: u64) -> Result<()> {
        let by_class = task_train.rows_by_class();
        if let Some((c, _)) = by_class.iter().find(|(c, _)| self.contains(*c)) {
            return Err(Error::DuplicateClass(*c));
        }
        for (class, rows) in by_class {
            let mut rng = seed::rng(seed, &[0xb0f, u64::from(class)]);
            let take = self.capacity_per_class.min(rows.len());
            let mut picked: Vec<usize> = index::sample(&mut rng, rows.len(), take)
                .into_iter()
                .map(|i| rows[i])
                .collect();
            picked.sort_unstable();
            let features = task_train.features().select_rows(&picked);
            self.per_class.insert(
                class,
                ClassSlots {
                    source_rows: picked,
                    features,
                },
            );
        }
        Ok(())
    }
}

/// Functional form of [`ReplayBuffer::update`].
pub fn update_buffer(
    mut buf: ReplayBuffer,
    task_train: &EncodedDataset,
    seed: u64,
) -> Result<ReplayBuffer> {
    buf.update(task_train, seed)?;
    Ok(buf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    /// Row of the current task's training set.
    Task(usize),
    /// Slot of a buffered class.
    Buffer { slot: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochSample {
    pub class: u32,
    pub source: SampleSource,
}

/// `target` indices into `0..available`: whole passes over every index, then
/// the remainder without replacement. Subsamples when `target < available`.
fn balanced_indices(available: usize, target: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut out = Vec::with_capacity(target);
    for _ in 0..target / available {
        out.extend(0..available);
    }
    out.extend(index::sample(rng, available, target % available));
    out
}

/// One epoch's worth of training data: the new task plus the buffer.
#[derive(Debug, Clone, Copy)]
pub struct EpochBuilder<'a> {
    task: &'a EncodedDataset,
    buffer: &'a ReplayBuffer,
}

impl<'a> EpochBuilder<'a> {
    pub fn new(task: &'a EncodedDataset, buffer: &'a ReplayBuffer) -> Self {
        Self { task, buffer }
    }

    pub fn task(&self) -> &'a EncodedDataset {
        self.task
    }

    pub fn buffer(&self) -> &'a ReplayBuffer {
        self.buffer
    }

    /// Every class an epoch can contain, ascending.
    pub fn classes(&self) -> Vec<u32> {
        let mut all = self.task.present_classes();
        all.extend(
            self.buffer
                .per_class
                .iter()
                .filter(|(c, s)| s.features.rows() > 0 && !all.contains(c))
                .map(|(c, _)| *c)
                .collect::<Vec<_>>(),
        );
        all.sort_unstable();
        all
    }

    pub fn features(&self, sample: &EpochSample) -> &'a [f32] {
        match sample.source {
            SampleSource::Task(row) => self.task.row(row),
            SampleSource::Buffer { slot } => {
                self.buffer.per_class[&sample.class].features.row(slot)
            }
        }
    }

    pub fn build(&self, seed: u64) -> Result<Vec<EpochSample>> {
        if self.task.is_empty() {
            return Err(Error::EmptyData);
        }
        let new_classes = self.task.rows_by_class();
        let s = new_classes.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
        let mut rng = seed::rng(seed, &[0xe90c]);
        let mut epoch = Vec::new();

        for (class, rows) in &new_classes {
            epoch.extend(
                balanced_indices(rows.len(), s, &mut rng)
                    .into_iter()
                    .map(|i| EpochSample {
                        class: *class,
                        source: SampleSource::Task(rows[i]),
                    }),
            );
        }
        for (&class, slots) in &self.buffer.per_class {
            let available = slots.features.rows();
            if available == 0 || new_classes.iter().any(|(c, _)| *c == class) {
                continue;
            }
            epoch.extend(
                balanced_indices(available, s, &mut rng)
                    .into_iter()
                    .map(|slot| EpochSample {
                        class,
                        source: SampleSource::Buffer { slot },
                    }),
            );
        }
        epoch.shuffle(&mut rng);
        Ok(epoch)
    }
}

pub fn build_balanced_epoch(
    task_train: &EncodedDataset,
    buf: &ReplayBuffer,
    seed: u64,
) -> Result<Vec<EpochSample>> {
    EpochBuilder::new(task_train, buf).build(seed)
}
