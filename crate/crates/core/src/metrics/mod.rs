//! Accuracy-matrix metrics, the training protocols that produce them, and the
//! forgetting regression.

mod protocol;

pub use protocol::{
    run_cl, run_few_shot, run_iid, run_protocol, run_task_iid, ClRun, ClassifierSpec, FewShotRun,
    MlpSetup, Protocol, ProtocolResult, FEW_SHOT_PER_CLASS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ols_r2, Matrix64};

/// `A[i][t]`: accuracy on task `i`'s test set after learning task `t`, for
/// `t >= i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    values: Vec<Vec<Option<f64>>>,
    test_sizes: Vec<usize>,
}

impl AccuracyMatrix {
    pub fn new(n_tasks: usize) -> Self {
        Self {
            values: vec![vec![None; n_tasks]; n_tasks],
            test_sizes: vec![0; n_tasks],
        }
    }

    /// Builds a complete matrix from rows `i` holding `A[i][i..]`.
    pub fn from_upper_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::new(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n - i {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} of a {n}-task matrix needs {} entries, got {}",
                    n - i,
                    row.len()
                )));
            }
            for (k, &v) in row.iter().enumerate() {
                m.record(i, i + k, v)?;
            }
        }
        Ok(m)
    }

    pub fn n_tasks(&self) -> usize {
        self.values.len()
    }

    pub fn record(&mut self, task: usize, time: usize, accuracy: f64) -> Result<()> {
        let n = self.n_tasks();
        if task > time || time >= n {
            return Err(Error::ShapeMismatch(format!(
                "entry A[{task}][{time}] outside a {n}-task matrix"
            )));
        }
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::BadConfig(format!(
                "accuracy must lie in [0, 1], got {accuracy}"
            )));
        }
        self.values[task][time] = Some(accuracy);
        Ok(())
    }

    pub fn set_test_size(&mut self, task: usize, n: usize) {
        self.test_sizes[task] = n;
    }

    pub fn test_sizes(&self) -> &[usize] {
        &self.test_sizes
    }

    pub fn get(&self, task: usize, time: usize) -> Option<f64> {
        self.values.get(task)?.get(time).copied().flatten()
    }

    fn require(&self, task: usize, time: usize) -> Result<f64> {
        self.get(task, time).ok_or_else(|| {
            Error::ShapeMismatch(format!("accuracy matrix is missing A[{task}][{time}]"))
        })
    }

    pub fn is_complete(&self) -> bool {
        let n = self.n_tasks();
        (0..n).all(|t| (0..=t).all(|i| self.get(i, t).is_some()))
    }

    /// Mean of the just-trained accuracies `A[i][i]`.
    pub fn task_cl_accuracy(&self) -> Result<f64> {
        let n = self.n_tasks();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        let mut sum = 0.0;
        for i in 0..n {
            sum += self.require(i, i)?;
        }
        Ok(sum / n as f64)
    }

    /// `(1/T) Σ_t (A[t][t] − A[t][T−1]) / A[t][t]`.
    pub fn relative_forgetting(&self) -> Result<f64> {
        let n = self.n_tasks();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        let mut sum = 0.0;
        for t in 0..n {
            let first = self.require(t, t)?;
            let last = self.require(t, n - 1)?;
            if first == 0.0 {
                return Err(Error::RelativeForgettingUndefined { task: t });
            }
            sum += (first - last) / first;
        }
        Ok(sum / n as f64)
    }
}

/// Accuracy on the union of all test sets, weighted by their sizes.
pub fn final_cl_accuracy(correct: &[usize], sizes: &[usize]) -> Result<f64> {
    if correct.len() != sizes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} correct counts for {} test sets",
            correct.len(),
            sizes.len()
        )));
    }
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::EmptyData);
    }
    if let Some(i) = (0..sizes.len()).find(|&i| correct[i] > sizes[i]) {
        return Err(Error::ShapeMismatch(format!(
            "test set {i} has {} correct out of {}",
            correct[i], sizes[i]
        )));
    }
    Ok(correct.iter().sum::<usize>() as f64 / total as f64)
}

/// [`final_cl_accuracy`] over concatenated predictions and labels.
pub fn final_cl_accuracy_from_predictions(predicted: &[u32], labels: &[u32]) -> Result<f64> {
    if predicted.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let correct = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    final_cl_accuracy(&[correct], &[labels.len()])
}

/// Scalar protocol results feeding [`table1_report`]. Missing entries leave
/// the metrics that depend on them unset.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Table1Inputs {
    pub a_cl: f64,
    pub a_cl_reinit: Option<f64>,
    pub a_iid: Option<f64>,
    pub a_task_iid: Option<f64>,
    pub a_task_fs: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub a_cl: Option<f64>,
    pub a_cl_reinit: Option<f64>,
    pub a_nmc: Option<f64>,
    pub a_slda: Option<f64>,
    pub a_task_cl: Option<f64>,
    pub a_task_iid: Option<f64>,
    pub a_iid: Option<f64>,
    pub a_task_fs: Option<f64>,
    pub forgetting: Option<f64>,
    pub relative_forgetting: Option<f64>,
    pub transfer: Option<f64>,
    pub interference: Option<f64>,
    pub interference_total: Option<f64>,
    pub er_size: Option<usize>,
    pub ordering_seed: u64,
}

fn check_unit(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(0.0..=1.0).contains(&x) => Err(Error::BadConfig(format!(
            "{name} must lie in [0, 1], got {x}"
        ))),
        _ => Ok(()),
    }
}

pub fn table1_report(a: &AccuracyMatrix, inputs: &Table1Inputs) -> Result<MetricsReport> {
    build_report(a, inputs, true)
}

/// Like [`table1_report`], but a task with zero just-trained accuracy leaves
/// `relative_forgetting` unset instead of failing.
pub fn table1_report_lenient(a: &AccuracyMatrix, inputs: &Table1Inputs) -> Result<MetricsReport> {
    build_report(a, inputs, false)
}

fn build_report(a: &AccuracyMatrix, inputs: &Table1Inputs, strict: bool) -> Result<MetricsReport> {
    check_unit("a_cl", Some(inputs.a_cl))?;
    check_unit("a_cl_reinit", inputs.a_cl_reinit)?;
    check_unit("a_iid", inputs.a_iid)?;
    check_unit("a_task_iid", inputs.a_task_iid)?;
    check_unit("a_task_fs", inputs.a_task_fs)?;
    if !a.is_complete() {
        return Err(Error::ShapeMismatch("accuracy matrix is incomplete".into()));
    }
    let a_task_cl = a.task_cl_accuracy()?;
    let relative_forgetting = match a.relative_forgetting() {
        Err(Error::RelativeForgettingUndefined { task }) if !strict => {
            log::warn!("relative forgetting undefined: task {task} has zero accuracy");
            None
        }
        r => Some(r?),
    };
    Ok(MetricsReport {
        a_cl: Some(inputs.a_cl),
        a_cl_reinit: inputs.a_cl_reinit,
        a_task_cl: Some(a_task_cl),
        a_task_iid: inputs.a_task_iid,
        a_iid: inputs.a_iid,
        a_task_fs: inputs.a_task_fs,
        forgetting: Some(a_task_cl - inputs.a_cl),
        relative_forgetting,
        transfer: inputs.a_cl_reinit.map(|r| inputs.a_cl - r),
        interference: inputs.a_task_iid.map(|t| t - a_task_cl),
        interference_total: inputs.a_task_iid.zip(inputs.a_iid).map(|(t, i)| t - i),
        ..MetricsReport::default()
    })
}

/// Single-predictor OLS `R²` of forgetting on each named predictor.
pub fn forgetting_regression(
    predictors: &[(&str, &[f64])],
    forgetting: &[f64],
) -> Result<Vec<(String, f64)>> {
    if forgetting.len() < 5 {
        return Err(Error::ShapeMismatch(format!(
            "forgetting regression needs at least 5 observations, got {}",
            forgetting.len()
        )));
    }
    predictors
        .iter()
        .map(|(name, values)| {
            let x = Matrix64::from_columns(&[*values])?;
            Ok((name.to_string(), ols_r2(&x, forgetting)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_weighted_accuracy() {
        assert!((final_cl_accuracy(&[80, 60], &[100, 100]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(final_cl_accuracy(&[30, 10], &[30, 10]).unwrap(), 1.0);
        assert_eq!(final_cl_accuracy(&[3], &[4]).unwrap(), 0.75);
        assert!(matches!(
            final_cl_accuracy(&[0], &[0]),
            Err(Error::EmptyData)
        ));
        assert_eq!(
            final_cl_accuracy_from_predictions(&[1, 2, 3, 3], &[1, 2, 3, 4]).unwrap(),
            0.75
        );
    }

    #[test]
    fn relative_forgetting_two_tasks() {
        let a = AccuracyMatrix::from_upper_rows(&[&[0.8, 0.6], &[0.7]]).unwrap();
        assert!((a.relative_forgetting().unwrap() - 0.125).abs() < 1e-15);
        assert!((a.task_cl_accuracy().unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn relative_forgetting_zero_and_undefined() {
        let flat =
            AccuracyMatrix::from_upper_rows(&[&[0.5, 0.5, 0.5], &[0.9, 0.9], &[0.3]]).unwrap();
        assert_eq!(flat.relative_forgetting().unwrap(), 0.0);
        let zero = AccuracyMatrix::from_upper_rows(&[&[0.5, 0.4], &[0.0]]).unwrap();
        assert!(matches!(
            zero.relative_forgetting(),
            Err(Error::RelativeForgettingUndefined { task: 1 })
        ));
    }

    #[test]
    fn report_differences() {
        let a = AccuracyMatrix::from_upper_rows(&[&[0.8, 0.6], &[0.7]]).unwrap();
        let r = table1_report(
            &a,
            &Table1Inputs {
                a_cl: 0.65,
                a_cl_reinit: Some(0.65),
                a_iid: Some(0.9),
                a_task_iid: Some(0.9),
                a_task_fs: None,
            },
        )
        .unwrap();
        assert_eq!(r.transfer, Some(0.0));
        assert_eq!(r.interference_total, Some(0.0));
        assert_eq!(r.forgetting, Some(0.75 - 0.65));
        assert_eq!(r.a_task_fs, None);
        let bad = Table1Inputs {
            a_cl: 1.5,
            ..Table1Inputs::default()
        };
        assert!(table1_report(&a, &bad).is_err());
        let mut partial = AccuracyMatrix::new(2);
        partial.record(0, 0, 0.5).unwrap();
        assert!(table1_report(&partial, &Table1Inputs::default()).is_err());
        assert!(partial.record(1, 0, 0.5).is_err());

        let zero = AccuracyMatrix::from_upper_rows(&[&[0.5, 0.4], &[0.0]]).unwrap();
        let inputs = Table1Inputs {
            a_cl: 0.2,
            ..Table1Inputs::default()
        };
        assert!(table1_report(&zero, &inputs).is_err());
        let lenient = table1_report_lenient(&zero, &inputs).unwrap();
        assert_eq!(lenient.relative_forgetting, None);
        assert_eq!(lenient.forgetting, Some(0.25 - 0.2));
    }

    #[test]
    fn regression_cases() {
        let x = [0.1, 0.4, 0.2, 0.9, 0.5, 0.7];
        let f: Vec<f64> = x.iter().map(|v| 0.3 - 0.2 * v).collect();
        let r = forgetting_regression(&[("a_task_iid", &x)], &f).unwrap();
        assert!((r[0].1 - 1.0).abs() < 1e-12);
        assert!(matches!(
            forgetting_regression(&[("x", &x)], &[0.2; 6]),
            Err(Error::ZeroVariance)
        ));
        assert!(forgetting_regression(&[("x", &x[..4])], &f[..4]).is_err());
    }
}
