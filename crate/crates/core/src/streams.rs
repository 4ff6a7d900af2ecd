//! Class-incremental scenarios: ordered sequences of class-disjoint tasks.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::featurestore::{EncodedDataset, SplitDataset};
use crate::seed;

/// Row indices of a task inside the train / val / test parts it came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskRows {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub task_id: usize,
    /// Global class ids introduced by this task, ascending.
    pub class_ids: Vec<u32>,
    pub train: EncodedDataset,
    pub val: EncodedDataset,
    pub test: EncodedDataset,
    pub rows: TaskRows,
}

#[derive(Debug, Clone)]
pub struct Stream {
    pub tasks: Vec<TaskSpec>,
    pub ordering_seed: u64,
    pub n_classes_total: usize,
}

impl Stream {
    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Class ids introduced by tasks `0..=t`, ascending.
    pub fn classes_through(&self, t: usize) -> Vec<u32> {
        let mut all: Vec<u32> = self.tasks[..=t]
            .iter()
            .flat_map(|task| task.class_ids.iter().copied())
            .collect();
        all.sort_unstable();
        all
    }
}

/// Sizes of `n_tasks` contiguous groups over `n_classes`; earlier groups
/// absorb the remainder one class each.
pub fn group_sizes(n_classes: usize, n_tasks: usize) -> Vec<usize> {
    let base = n_classes / n_tasks;
    let extra = n_classes % n_tasks;
    (0..n_tasks)
        .map(|t| base + usize::from(t < extra))
        .collect()
}

fn make_task(split: &SplitDataset, task_id: usize, mut class_ids: Vec<u32>) -> TaskSpec {
    class_ids.sort_unstable();
    let (train, train_rows) = split.train.restrict_to_classes(&class_ids);
    let (val, val_rows) = split.val.restrict_to_classes(&class_ids);
    let (test, test_rows) = split.test.restrict_to_classes(&class_ids);
    TaskSpec {
        task_id,
        class_ids,
        train,
        val,
        test,
        rows: TaskRows {
            train: train_rows,
            val: val_rows,
            test: test_rows,
        },
    }
}

/// Shuffles the class ids with `ordering_seed` and cuts them into `n_tasks`
/// contiguous groups.
pub fn build_class_incremental(
    split: &SplitDataset,
    n_tasks: usize,
    ordering_seed: u64,
) -> Result<Stream> {
    let n_classes = split.train.n_classes();
    if n_tasks == 0 {
        return Err(Error::BadConfig("a stream needs at least one task".into()));
    }
    if n_tasks > n_classes {
        return Err(Error::TooManyTasks { n_tasks, n_classes });
    }
    let mut order: Vec<u32> = (0..n_classes as u32).collect();
    order.shuffle(&mut seed::rng(ordering_seed, &[0x0bde]));

    let mut tasks = Vec::with_capacity(n_tasks);
    let mut start = 0;
    for (t, size) in group_sizes(n_classes, n_tasks).into_iter().enumerate() {
        tasks.push(make_task(split, t, order[start..start + size].to_vec()));
        start += size;
    }
    Ok(Stream {
        tasks,
        ordering_seed,
        n_classes_total: n_classes,
    })
}

/// One task per dataset, in the given order, with class ids offset so that
/// tasks stay disjoint.
pub fn build_multi_dataset(splits: &[SplitDataset]) -> Result<Stream> {
    let first = splits.first().ok_or(Error::EmptyData)?;
    let dim = first.train.dim();
    if let Some(s) = splits.iter().find(|s| s.train.dim() != dim) {
        return Err(Error::ShapeMismatch(format!(
            "datasets of dimension {dim} and {} cannot share a stream",
            s.train.dim()
        )));
    }
    let names: Vec<String> = splits
        .iter()
        .flat_map(|s| {
            let src = s.train.meta().source_dataset.clone();
            s.train
                .class_names()
                .iter()
                .map(move |c| format!("{src}/{c}"))
        })
        .collect();

    let mut tasks = Vec::with_capacity(splits.len());
    let mut offset = 0u32;
    for (t, s) in splits.iter().enumerate() {
        let n = s.train.n_classes() as u32;
        let relabeled = SplitDataset {
            train: s.train.relabeled(offset, names.clone())?,
            val: s.val.relabeled(offset, names.clone())?,
            test: s.test.relabeled(offset, names.clone())?,
            train_rows: s.train_rows.clone(),
            val_rows: s.val_rows.clone(),
            test_rows: s.test_rows.clone(),
        };
        tasks.push(make_task(&relabeled, t, (offset..offset + n).collect()));
        offset += n;
    }
    Ok(Stream {
        tasks,
        ordering_seed: 0,
        n_classes_total: offset as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurestore::testutil::grid_dataset;
    use crate::featurestore::{split_dataset, SplitFractions};

    fn split(n_classes: usize, per_class: usize) -> SplitDataset {
        split_dataset(
            &grid_dataset(n_classes, per_class, 2),
            SplitFractions::default(),
            1,
        )
        .unwrap()
        .0
    }

    #[test]
    fn five_even_tasks() {
        let s = build_class_incremental(&split(100, 10), 5, 0).unwrap();
        assert_eq!(s.n_tasks(), 5);
        assert!(s.tasks.iter().all(|t| t.class_ids.len() == 20));
        assert_eq!(s.n_classes_total, 100);
    }

    #[test]
    fn remainder_goes_to_earliest() {
        assert_eq!(group_sizes(10, 3), vec![4, 3, 3]);
        let s = build_class_incremental(&split(10, 10), 3, 4).unwrap();
        let sizes: Vec<usize> = s.tasks.iter().map(|t| t.class_ids.len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
    }

    #[test]
    fn seeded_ordering() {
        let sp = split(20, 10);
        let a = build_class_incremental(&sp, 4, 11).unwrap();
        let b = build_class_incremental(&sp, 4, 11).unwrap();
        let c = build_class_incremental(&sp, 4, 12).unwrap();
        let ids = |s: &Stream| {
            s.tasks
                .iter()
                .map(|t| t.class_ids.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(&a), ids(&b));
        assert_ne!(ids(&a), ids(&c));
    }

    #[test]
    fn tasks_partition_samples() {
        let sp = split(10, 10);
        let s = build_class_incremental(&sp, 3, 2).unwrap();
        let mut train: Vec<usize> = s.tasks.iter().flat_map(|t| t.rows.train.clone()).collect();
        train.sort_unstable();
        assert_eq!(train, (0..sp.train.len()).collect::<Vec<_>>());
        let mut classes: Vec<u32> = s.tasks.iter().flat_map(|t| t.class_ids.clone()).collect();
        classes.sort_unstable();
        assert_eq!(classes, (0..10).collect::<Vec<_>>());
        for t in &s.tasks {
            assert!(t.train.labels().iter().all(|l| t.class_ids.contains(l)));
            assert!(t.test.labels().iter().all(|l| t.class_ids.contains(l)));
        }
    }

    #[test]
    fn too_many_tasks() {
        assert!(matches!(
            build_class_incremental(&split(3, 10), 4, 0),
            Err(Error::TooManyTasks {
                n_tasks: 4,
                n_classes: 3
            })
        ));
    }

    #[test]
    fn multi_dataset_offsets() {
        let s = build_multi_dataset(&[split(100, 3), split(196, 3)]).unwrap();
        assert_eq!(s.n_tasks(), 2);
        assert_eq!(s.tasks[0].class_ids, (0..100).collect::<Vec<_>>());
        assert_eq!(s.tasks[1].class_ids, (100..296).collect::<Vec<_>>());
        assert_eq!(s.n_classes_total, 296);
        assert!(s.tasks[1]
            .train
            .labels()
            .iter()
            .all(|&l| (100..296).contains(&l)));

        let one = build_multi_dataset(&[split(4, 5)]).unwrap();
        assert_eq!(one.n_tasks(), 1);
        let six = build_multi_dataset(&vec![split(2, 5); 6]).unwrap();
        assert_eq!(six.n_tasks(), 6);
        assert_eq!(six.n_classes_total, 12);
    }
}
