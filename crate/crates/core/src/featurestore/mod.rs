//! Encoded datasets: latent features plus labels and encoder metadata.

mod lcf;
mod split;

use std::collections::BTreeSet;

pub use lcf::{decode_lcf, encode_lcf, read_lcf, write_lcf, LCF_MAGIC, LCF_VERSION};
pub use split::{split_dataset, SplitFractions, SplitWarning};

use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMeta {
    pub encoder_name: String,
    /// Width of the latent representation (`N_z`).
    pub latent_dim: usize,
    /// Flops to encode one sample with the encoder (`C_enc`).
    pub encode_flops_per_sample: u64,
    pub source_dataset: String,
}

/// Latent features (`n x d`), a dense 0-based class id per row, and metadata.
///
/// Complete datasets (constructed with [`EncodedDataset::new`] or read from
/// disk) contain every class at least once. Row subsets produced by
/// [`EncodedDataset::select_rows`] keep the full class list and may leave
/// some classes empty.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    features: DenseMatrix,
    labels: Vec<u32>,
    class_names: Vec<String>,
    meta: DatasetMeta,
}

impl EncodedDataset {
    pub fn new(
        features: DenseMatrix,
        labels: Vec<u32>,
        class_names: Vec<String>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        let ds = Self::new_partial(features, labels, class_names, meta)?;
        ds.check_coverage()?;
        Ok(ds)
    }

    /// Like [`new`](Self::new) but does not require every class to occur.
    pub fn new_partial(
        features: DenseMatrix,
        labels: Vec<u32>,
        class_names: Vec<String>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if meta.latent_dim != features.cols() {
            return Err(Error::ShapeMismatch(format!(
                "metadata latent_dim {} but features have {} columns",
                meta.latent_dim,
                features.cols()
            )));
        }
        let n_classes = class_names.len();
        if let Some((row, &l)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= n_classes)
        {
            return Err(Error::CorruptLabels(format!(
                "row {row} has label {l} but only {n_classes} classes exist"
            )));
        }
        Ok(Self {
            features,
            labels,
            class_names,
            meta,
        })
    }

    fn check_coverage(&self) -> Result<()> {
        let mut seen = vec![false; self.class_names.len()];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        match seen.iter().position(|s| !s) {
            Some(c) => Err(Error::CorruptLabels(format!("class {c} has no samples"))),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    #[inline]
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        self.features.row(i)
    }

    /// Class ids that occur at least once, ascending.
    pub fn present_classes(&self) -> Vec<u32> {
        self.labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Row indices of each present class, keyed by ascending class id.
    pub fn rows_by_class(&self) -> Vec<(u32, Vec<usize>)> {
        let mut per: Vec<Vec<usize>> = vec![Vec::new(); self.n_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            per[l as usize].push(i);
        }
        per.into_iter()
            .enumerate()
            .filter(|(_, rows)| !rows.is_empty())
            .map(|(c, rows)| (c as u32, rows))
            .collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            meta: self.meta.clone(),
        }
    }

    /// Rows whose label is in `classes`, in original order.
    pub fn restrict_to_classes(&self, classes: &[u32]) -> (Self, Vec<usize>) {
        let keep: BTreeSet<u32> = classes.iter().copied().collect();
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep.contains(&self.labels[i]))
            .collect();
        (self.select_rows(&idx), idx)
    }

    /// Same rows with every label shifted by `offset` in a class space of
    /// `class_names`.
    pub fn relabeled(&self, offset: u32, class_names: Vec<String>) -> Result<Self> {
        Self::new_partial(
            self.features.clone(),
            self.labels.iter().map(|l| l + offset).collect(),
            class_names,
            self.meta.clone(),
        )
    }

    /// Stacks row sets that share dimension and class space.
    pub fn vstack(parts: &[&EncodedDataset]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyData)?;
        if parts.iter().any(|p| p.class_names != first.class_names) {
            return Err(Error::ShapeMismatch(
                "cannot stack datasets with different class lists".into(),
            ));
        }
        let mats: Vec<&DenseMatrix> = parts.iter().map(|p| &p.features).collect();
        Self::new_partial(
            DenseMatrix::vconcat(&mats)?,
            parts
                .iter()
                .flat_map(|p| p.labels.iter().copied())
                .collect(),
            first.class_names.clone(),
            first.meta.clone(),
        )
    }
}

/// Disjoint train / validation / test row subsets of one source dataset.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: EncodedDataset,
    pub val: EncodedDataset,
    pub test: EncodedDataset,
    /// Source row indices of each part, ascending.
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Horizontally concatenates the representations of several encoders of the
/// same samples.
pub fn concat_ensemble(parts: &[EncodedDataset]) -> Result<EncodedDataset> {
    let first = parts.first().ok_or(Error::EmptyData)?;
    if parts.len() == 1 {
        return Ok(first.clone());
    }
    for p in &parts[1..] {
        if p.len() != first.len() {
            return Err(Error::ShapeMismatch(format!(
                "ensemble parts have {} and {} rows",
                first.len(),
                p.len()
            )));
        }
        if let Some(row) = (0..first.len()).find(|&i| p.labels[i] != first.labels[i]) {
            return Err(Error::LabelMismatch { row });
        }
        if p.class_names != first.class_names {
            return Err(Error::ShapeMismatch(
                "ensemble parts have different class lists".into(),
            ));
        }
    }
    let mats: Vec<&DenseMatrix> = parts.iter().map(|p| &p.features).collect();
    let features = DenseMatrix::hconcat(&mats)?;
    let meta = DatasetMeta {
        encoder_name: parts
            .iter()
            .map(|p| p.meta.encoder_name.as_str())
            .collect::<Vec<_>>()
            .join("+"),
        latent_dim: features.cols(),
        encode_flops_per_sample: parts.iter().map(|p| p.meta.encode_flops_per_sample).sum(),
        source_dataset: first.meta.source_dataset.clone(),
    };
    EncodedDataset::new_partial(
        features,
        first.labels.clone(),
        first.class_names.clone(),
        meta,
    )
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    pub fn dataset(rows: &[(&[f32], u32)], n_classes: usize) -> EncodedDataset {
        let feats: Vec<&[f32]> = rows.iter().map(|r| r.0).collect();
        let features = DenseMatrix::from_rows(&feats).unwrap();
        let d = features.cols();
        EncodedDataset::new_partial(
            features,
            rows.iter().map(|r| r.1).collect(),
            (0..n_classes).map(|c| format!("c{c}")).collect(),
            DatasetMeta {
                encoder_name: "test".into(),
                latent_dim: d,
                encode_flops_per_sample: 0,
                source_dataset: "unit".into(),
            },
        )
        .unwrap()
    }

    /// `per_class` rows for each of `n_classes`; row value encodes (class, index).
    pub fn grid_dataset(n_classes: usize, per_class: usize, dim: usize) -> EncodedDataset {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for c in 0..n_classes {
            for i in 0..per_class {
                for j in 0..dim {
                    data.push((c * 1000 + i) as f32 + j as f32 * 0.001);
                }
                labels.push(c as u32);
            }
        }
        EncodedDataset::new(
            DenseMatrix::new(labels.len(), dim, data).unwrap(),
            labels,
            (0..n_classes).map(|c| format!("c{c}")).collect(),
            DatasetMeta {
                encoder_name: "grid".into(),
                latent_dim: dim,
                encode_flops_per_sample: 10,
                source_dataset: "grid".into(),
            },
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn coverage_is_enforced_for_complete_datasets() {
        let features = DenseMatrix::from_rows(&[[0.0f32], [1.0]]).unwrap();
        let meta = DatasetMeta {
            encoder_name: "e".into(),
            latent_dim: 1,
            encode_flops_per_sample: 0,
            source_dataset: "s".into(),
        };
        let names = vec!["a".to_string(), "b".into(), "c".into()];
        assert!(matches!(
            EncodedDataset::new(features.clone(), vec![0, 1], names.clone(), meta.clone()),
            Err(Error::CorruptLabels(_))
        ));
        assert!(matches!(
            EncodedDataset::new(features, vec![0, 3], names, meta),
            Err(Error::CorruptLabels(_))
        ));
    }

    #[test]
    fn concat_two_parts() {
        let a = dataset(&[(&[1.0, 2.0, 3.0], 0), (&[4.0, 5.0, 6.0], 1)], 2);
        let mut b = dataset(&[(&[0.0; 5], 0), (&[1.0; 5], 1)], 2);
        b.meta.encoder_name = "other".into();
        b.meta.encode_flops_per_sample = 7;
        let c = concat_ensemble(&[a.clone(), b]).unwrap();
        assert_eq!(c.dim(), 8);
        assert_eq!(c.meta().latent_dim, 8);
        assert_eq!(c.meta().encoder_name, "test+other");
        assert_eq!(c.meta().encode_flops_per_sample, 7);
        assert_eq!(c.row(1), &[4.0, 5.0, 6.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(c.labels(), a.labels());
    }

    #[test]
    fn concat_errors_and_identity() {
        let a = dataset(&[(&[1.0], 0), (&[2.0], 1)], 2);
        let b = dataset(&[(&[1.0], 1), (&[2.0], 1)], 2);
        let short = dataset(&[(&[1.0], 0)], 2);
        assert!(matches!(
            concat_ensemble(&[a.clone(), b]),
            Err(Error::LabelMismatch { row: 0 })
        ));
        assert!(matches!(
            concat_ensemble(&[a.clone(), short]),
            Err(Error::ShapeMismatch(_))
        ));
        assert_eq!(concat_ensemble(std::slice::from_ref(&a)).unwrap(), a);
        assert!(matches!(concat_ensemble(&[]), Err(Error::EmptyData)));
    }

    #[test]
    fn concat_is_associative() {
        let a = dataset(&[(&[1.0], 0), (&[2.0], 1)], 2);
        let b = dataset(&[(&[3.0, 4.0], 0), (&[5.0, 6.0], 1)], 2);
        let c = dataset(&[(&[7.0], 0), (&[8.0], 1)], 2);
        let left = concat_ensemble(&[concat_ensemble(&[a.clone(), b.clone()]).unwrap(), c.clone()])
            .unwrap();
        let right = concat_ensemble(&[a, concat_ensemble(&[b, c]).unwrap()]).unwrap();
        assert_eq!(left.features(), right.features());
    }

    #[test]
    fn rows_by_class_and_restrict() {
        let ds = grid_dataset(3, 2, 1);
        let by = ds.rows_by_class();
        assert_eq!(by, vec![(0, vec![0, 1]), (1, vec![2, 3]), (2, vec![4, 5])]);
        let (sub, idx) = ds.restrict_to_classes(&[2, 0]);
        assert_eq!(idx, vec![0, 1, 4, 5]);
        assert_eq!(sub.present_classes(), vec![0, 2]);
        assert_eq!(sub.n_classes(), 3);
    }
}
