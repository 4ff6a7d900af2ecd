use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains no data")]
    EmptyData,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("k = {k} is out of range (valid: 1..={max})")]
    BadK { k: usize, max: usize },
    #[error("matrix is singular even after diagonal jitter")]
    SingularMatrix,
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes {0:?}, expected \"LCF1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload: {0}")]
    Truncated(String),
    #[error("corrupt labels: {0}")]
    CorruptLabels(String),
    #[error("malformed container: {0}")]
    Malformed(String),
    #[error("labels differ between ensemble parts at row {row}")]
    LabelMismatch { row: usize },

    #[error("{n_tasks} tasks requested but only {n_classes} classes available")]
    TooManyTasks { n_tasks: usize, n_classes: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("class {0} is already present")]
    DuplicateClass(u32),
    #[error("class {0} is not known to the model")]
    UnknownClass(u32),
    #[error("training diverged at step {step} (loss = {loss})")]
    DivergedTraining { step: usize, loss: f64 },
    #[error("model has too few classes: {0}")]
    EmptyModel(String),
    #[error("at least two tasks are required")]
    NeedTwoTasks,
    #[error("prototype of class {0} has zero norm")]
    ZeroPrototype(u32),
    #[error("relative forgetting undefined: A[{task}][{task}] = 0")]
    RelativeForgettingUndefined { task: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
