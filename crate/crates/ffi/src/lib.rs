//! C ABI over `latentcl`.
//!
//! Every fallible function returns an [`LcStatus`]; on failure a message is
//! kept per thread and can be read with [`lc_last_error_message`]. Objects
//! cross the boundary as opaque handles that the caller releases with the
//! matching `*_free` function. Panics never unwind into C: they are reported
//! as `LC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use latentcl::classifiers::{NmcModel, Predictor, SldaState};
use latentcl::compute::{
    end2end_er_cost, latent_er_cost, metric_classifier_cost, mlp_flops_per_sample,
    uniform_schedule, CostModel, MetricKind, SldaCovarianceTerm,
};
use latentcl::featurestore::{concat_ensemble, read_lcf, write_lcf};
use latentcl::runner::{parse_config, run_experiment};
use latentcl::similarity::{class_prototype_similarity, subspace_overlap};
use latentcl::synth::{generate_synthetic, SynthConfig};
use latentcl::{DatasetMeta, DenseMatrix, EncodedDataset, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    Numeric = 6,
    Config = 7,
    Model = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcMetricKind {
    Nmc = 0,
    Slda = 1,
}

/// Loaded or generated dataset.
pub struct LcDataset(EncodedDataset);

/// Nearest-mean classifier.
pub struct LcNmc(NmcModel);

/// Streaming LDA state.
pub struct LcSlda(SldaState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => LcStatus::Io,
            Error::BadMagic(_)
            | Error::UnsupportedVersion(_)
            | Error::Truncated(_)
            | Error::CorruptLabels(_)
            | Error::Malformed(_) => LcStatus::Format,
            Error::ShapeMismatch(_)
            | Error::LabelMismatch { .. }
            | Error::EmptyData
            | Error::BadK { .. }
            | Error::NeedTwoTasks
            | Error::TooManyTasks { .. } => LcStatus::Shape,
            Error::NotSymmetric(_)
            | Error::SingularMatrix
            | Error::ZeroVariance
            | Error::NonFinite(_)
            | Error::ZeroPrototype(_)
            | Error::RelativeForgettingUndefined { .. }
            | Error::DivergedTraining { .. } => LcStatus::Numeric,
            Error::BadConfig(_) | Error::UnknownKey(_) => LcStatus::Config,
            Error::DuplicateClass(_) | Error::UnknownClass(_) | Error::EmptyModel(_) => {
                LcStatus::Model
            }
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(LcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(LcStatus::InvalidArgument, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            LcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn matrix(data: &[f32], rows: usize, cols: usize) -> Result<DenseMatrix, Failure> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| invalid("matrix size overflows"))?;
    Ok(DenseMatrix::new(rows, cols, data[..len].to_vec())?)
}

fn rows_len(rows: usize, cols: usize) -> Result<usize, Failure> {
    rows.checked_mul(cols)
        .ok_or_else(|| invalid("matrix size overflows"))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads an LCF file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_read(
    path: *const c_char,
    out: *mut *mut LcDataset,
) -> LcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ds = read_lcf(PathBuf::from(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(LcDataset(ds)));
        Ok(())
    })
}

/// Writes `ds` as an LCF file.
///
/// # Safety
/// `ds` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_write(ds: *const LcDataset, path: *const c_char) -> LcStatus {
    guard(|| {
        let ds = handle(ds, "ds")?;
        write_lcf(&ds.0, PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Generates a synthetic dataset from a JSON synth config.
///
/// # Safety
/// `config_json` must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_synth(
    config_json: *const c_char,
    out: *mut *mut LcDataset,
) -> LcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg: SynthConfig = serde_json::from_str(str_arg(config_json, "config_json")?)
            .map_err(|e| Failure(LcStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(LcDataset(generate_synthetic(&cfg)?)));
        Ok(())
    })
}

/// Builds a dataset from row-major `n x d` features and `n` labels. Class
/// names are `"0"`, `"1"`, ...
///
/// # Safety
/// `features` must hold `n * d` floats and `labels` `n` values;
/// `encoder_name` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_from_arrays(
    features: *const f32,
    labels: *const u32,
    n: usize,
    d: usize,
    n_classes: u32,
    encoder_name: *const c_char,
    encode_flops_per_sample: u64,
    out: *mut *mut LcDataset,
) -> LcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let feats = slice_arg(features, rows_len(n, d)?, "features")?;
        let labels = slice_arg(labels, n, "labels")?;
        let meta = DatasetMeta {
            encoder_name: str_arg(encoder_name, "encoder_name")?.to_string(),
            latent_dim: d,
            encode_flops_per_sample,
            source_dataset: String::new(),
        };
        let ds = EncodedDataset::new(
            matrix(feats, n, d)?,
            labels.to_vec(),
            (0..n_classes).map(|c| c.to_string()).collect(),
            meta,
        )?;
        *out = Box::into_raw(Box::new(LcDataset(ds)));
        Ok(())
    })
}

/// Feature-wise concatenation of `n_parts` datasets with identical labels.
///
/// # Safety
/// `parts` must point to `n_parts` valid dataset handles.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_concat(
    parts: *const *const LcDataset,
    n_parts: usize,
    out: *mut *mut LcDataset,
) -> LcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let handles = slice_arg(parts, n_parts, "parts")?;
        let owned = handles
            .iter()
            .map(|&h| handle(h, "parts[i]").map(|d| d.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        *out = Box::into_raw(Box::new(LcDataset(concat_ensemble(&owned)?)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_free(ds: *mut LcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Row count, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_rows(ds: *const LcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `ds` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_dim(ds: *const LcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.dim())
}

/// # Safety
/// `ds` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_n_classes(ds: *const LcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_classes())
}

/// Copies the `rows x dim` features into `out` (capacity `len` floats).
///
/// # Safety
/// `out` must be writable for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_copy_features(
    ds: *const LcDataset,
    out: *mut f32,
    len: usize,
) -> LcStatus {
    guard(|| {
        let data = handle(ds, "ds")?.0.features().data();
        if len < data.len() {
            return Err(invalid(format!(
                "buffer holds {len} floats, need {}",
                data.len()
            )));
        }
        slice_out(out, data.len(), "out")?.copy_from_slice(data);
        Ok(())
    })
}

/// Copies the labels into `out` (capacity `len`).
///
/// # Safety
/// `out` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn lc_dataset_copy_labels(
    ds: *const LcDataset,
    out: *mut u32,
    len: usize,
) -> LcStatus {
    guard(|| {
        let labels = handle(ds, "ds")?.0.labels();
        if len < labels.len() {
            return Err(invalid(format!(
                "buffer holds {len} labels, need {}",
                labels.len()
            )));
        }
        slice_out(out, labels.len(), "out")?.copy_from_slice(labels);
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_nmc_new(dim: usize, out: *mut *mut LcNmc) -> LcStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(LcNmc(NmcModel::new(dim))));
        Ok(())
    })
}

/// Adds `n` rows of `x` (row-major, model dimension wide) with labels `y`.
///
/// # Safety
/// `model` must be valid; `x` must hold `n * dim` floats and `y` `n` labels.
#[no_mangle]
pub unsafe extern "C" fn lc_nmc_update(
    model: *mut LcNmc,
    x: *const f32,
    y: *const u32,
    n: usize,
) -> LcStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let d = m.0.dim();
        let x = matrix(slice_arg(x, rows_len(n, d)?, "x")?, n, d)?;
        m.0.update(&x, slice_arg(y, n, "y")?)?;
        Ok(())
    })
}

/// Writes one predicted class id per row into `out`.
///
/// # Safety
/// `x` must hold `n * dim` floats and `out` room for `n` ids.
#[no_mangle]
pub unsafe extern "C" fn lc_nmc_predict(
    model: *const LcNmc,
    x: *const f32,
    n: usize,
    out: *mut u32,
) -> LcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let d = m.0.dim();
        let x = matrix(slice_arg(x, rows_len(n, d)?, "x")?, n, d)?;
        slice_out(out, n, "out")?.copy_from_slice(&m.0.predict(&x)?);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_nmc_free(model: *mut LcNmc) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `shrinkage` in (0, 1]; 1e-4 is the usual choice.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_slda_new(
    dim: usize,
    shrinkage: f64,
    out: *mut *mut LcSlda,
) -> LcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(LcSlda(SldaState::new(dim, shrinkage)?)));
        Ok(())
    })
}

/// Streams `n` rows into the state, in order.
///
/// # Safety
/// As for [`lc_nmc_update`].
#[no_mangle]
pub unsafe extern "C" fn lc_slda_update(
    state: *mut LcSlda,
    x: *const f32,
    y: *const u32,
    n: usize,
) -> LcStatus {
    guard(|| {
        let s = state.as_mut().ok_or_else(|| null("state"))?;
        let d = s.0.dim();
        let x = matrix(slice_arg(x, rows_len(n, d)?, "x")?, n, d)?;
        s.0.update(&x, slice_arg(y, n, "y")?)?;
        Ok(())
    })
}

/// Needs at least two classes.
///
/// # Safety
/// As for [`lc_nmc_predict`].
#[no_mangle]
pub unsafe extern "C" fn lc_slda_predict(
    state: *const LcSlda,
    x: *const f32,
    n: usize,
    out: *mut u32,
) -> LcStatus {
    guard(|| {
        let s = handle(state, "state")?;
        let d = s.0.dim();
        let x = matrix(slice_arg(x, rows_len(n, d)?, "x")?, n, d)?;
        let pred = s.0.classifier()?.predict(&x)?;
        slice_out(out, n, "out")?.copy_from_slice(&pred);
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_slda_free(state: *mut LcSlda) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Subspace overlap of two row-major feature blocks sharing `cols` columns.
///
/// # Safety
/// `a` must hold `rows_a * cols` floats, `b` `rows_b * cols`.
#[no_mangle]
pub unsafe extern "C" fn lc_subspace_overlap(
    a: *const f32,
    rows_a: usize,
    b: *const f32,
    rows_b: usize,
    cols: usize,
    k: usize,
    out: *mut f64,
) -> LcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ta = matrix(slice_arg(a, rows_len(rows_a, cols)?, "a")?, rows_a, cols)?;
        let tb = matrix(slice_arg(b, rows_len(rows_b, cols)?, "b")?, rows_b, cols)?;
        *out = subspace_overlap(&ta, &tb, k)?;
        Ok(())
    })
}

/// Mean pairwise cosine between class prototypes of `ds`.
///
/// # Safety
/// `ds` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_prototype_similarity(ds: *const LcDataset, out: *mut f64) -> LcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = class_prototype_similarity(&handle(ds, "ds")?.0)?.average;
        Ok(())
    })
}

/// Head forward and train-step flops for one sample.
///
/// # Safety
/// `forward` and `train_step` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_mlp_flops_per_sample(
    d: usize,
    h: usize,
    c: usize,
    forward: *mut f64,
    train_step: *mut f64,
) -> LcStatus {
    guard(|| {
        let (f, t) = mlp_flops_per_sample(d, h, c);
        *out_arg(forward, "forward")? = f;
        *out_arg(train_step, "train_step")? = t;
        Ok(())
    })
}

/// Stream-end cumulative flops of latent and end-to-end replay over equal
/// tasks.
///
/// # Safety
/// `latent` and `end2end` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_er_cost(
    c_enc: f64,
    n_z: usize,
    hidden: usize,
    n_tasks: usize,
    classes_per_task: usize,
    samples_per_class: usize,
    epochs: usize,
    er_size: usize,
    latent: *mut f64,
    end2end: *mut f64,
) -> LcStatus {
    guard(|| {
        let cost = CostModel::new(c_enc, n_z, hidden);
        let sched = uniform_schedule(n_tasks, classes_per_task, samples_per_class);
        *out_arg(latent, "latent")? = latent_er_cost(&sched, epochs, er_size, &cost)?.total();
        *out_arg(end2end, "end2end")? = end2end_er_cost(&sched, epochs, er_size, &cost)?.total();
        Ok(())
    })
}

/// Encoding plus fitting cost of a metric classifier. `corrected` selects
/// the per-sample outer-product reading of the SLDA covariance term.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_metric_classifier_cost(
    kind: LcMetricKind,
    n_samples: usize,
    n_classes: usize,
    c_enc: f64,
    n_z: usize,
    corrected: bool,
    out: *mut f64,
) -> LcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kind = match kind {
            LcMetricKind::Nmc => MetricKind::Nmc,
            LcMetricKind::Slda => MetricKind::Slda,
        };
        let term = if corrected {
            SldaCovarianceTerm::Corrected
        } else {
            SldaCovarianceTerm::Literal
        };
        *out = metric_classifier_cost(
            kind,
            n_samples,
            n_classes,
            &CostModel::new(c_enc, n_z, 0),
            term,
        )?;
        Ok(())
    })
}

/// Runs an experiment config file and writes its reports. `n_cells` and
/// `n_failed` receive the cell counts when non-null.
///
/// # Safety
/// `config_path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lc_run_experiment(
    config_path: *const c_char,
    n_cells: *mut usize,
    n_failed: *mut usize,
) -> LcStatus {
    guard(|| {
        let cfg = parse_config(&PathBuf::from(str_arg(config_path, "config_path")?))?;
        let report = run_experiment(&cfg)?;
        if let Some(n) = n_cells.as_mut() {
            *n = report.cells.len();
        }
        if let Some(f) = n_failed.as_mut() {
            *f = report.cells.iter().filter(|c| c.status != "ok").count();
        }
        Ok(())
    })
}
