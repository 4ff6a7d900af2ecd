use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};

use crate::classifiers::{default_grid, Hyperparams, DEFAULT_HIDDEN, DEFAULT_SHRINKAGE};
use crate::error::{Error, Result};
use crate::featurestore::SplitFractions;
use crate::similarity::DEFAULT_K;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Lcf(PathBuf),
    /// Feature-wise concatenation of several encodings of one dataset.
    Ensemble(Vec<PathBuf>),
    Synth(SynthConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub source: DatasetSource,
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamKind {
    /// Each dataset on its own, split into `n_tasks` class groups.
    ClassIncremental,
    /// All datasets in order, one task each.
    MultiDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Mlp,
    Nmc,
    Slda,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Nmc => "nmc",
            ClassifierKind::Slda => "slda",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetEntry>,
    pub stream: StreamKind,
    pub n_tasks: usize,
    pub ordering_seeds: Vec<u64>,
    pub er_sizes: Vec<usize>,
    pub classifiers: Vec<ClassifierKind>,
    pub grid: Vec<Hyperparams>,
    pub epochs: usize,
    pub hidden: usize,
    pub shrinkage: f64,
    pub k: usize,
    pub split: SplitFractions,
    pub few_shot_epochs: usize,
    pub output: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

const KEYS: &[&str] = &[
    "datasets",
    "stream",
    "n_tasks",
    "ordering_seeds",
    "er_sizes",
    "classifiers",
    "grid",
    "epochs",
    "hidden",
    "shrinkage",
    "k",
    "split",
    "few_shot_epochs",
    "output",
    "seed",
    "workers",
];

const DATASET_KEYS: &[&str] = &["path", "ensemble", "synth", "name"];

/// Turns serde's "unknown field `x`" into `UnknownKey`, anything else into
/// `BadConfig`.
fn serde_error(context: &str, e: serde_json::Error) -> Error {
    let msg = e.to_string();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return Error::UnknownKey(rest[..end].to_string());
        }
    }
    Error::BadConfig(format!("{context}: {msg}"))
}

fn field<T: for<'de> Deserialize<'de>>(obj: &Map<String, Value>, key: &str) -> Result<Option<T>> {
    obj.get(key)
        .map(|v| serde_json::from_value(v.clone()).map_err(|e| serde_error(key, e)))
        .transpose()
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str]) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::UnknownKey(k.clone())),
        None => Ok(()),
    }
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn parse_dataset(v: &Value, base: &Path) -> Result<DatasetEntry> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::BadConfig("each dataset must be a JSON object".into()))?;
    check_keys(obj, DATASET_KEYS)?;
    let name: Option<String> = field(obj, "name")?;
    let path: Option<PathBuf> = field(obj, "path")?;
    let ensemble: Option<Vec<PathBuf>> = field(obj, "ensemble")?;
    let synth: Option<SynthConfig> = field(obj, "synth")?;
    let source = match (path, ensemble, synth) {
        (Some(p), None, None) => DatasetSource::Lcf(resolve(base, p)),
        (None, Some(parts), None) if !parts.is_empty() => {
            DatasetSource::Ensemble(parts.into_iter().map(|p| resolve(base, p)).collect())
        }
        (None, None, Some(cfg)) => {
            cfg.validate()?;
            DatasetSource::Synth(cfg)
        }
        _ => {
            return Err(Error::BadConfig(
                "a dataset needs exactly one of `path`, `ensemble` or `synth`".into(),
            ))
        }
    };
    Ok(DatasetEntry { source, name })
}

impl ExperimentConfig {
    /// Parses a JSON config. Relative paths are taken relative to `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let root: Value =
            serde_json::from_str(text).map_err(|e| Error::BadConfig(format!("config: {e}")))?;
        let obj = root
            .as_object()
            .ok_or_else(|| Error::BadConfig("config must be a JSON object".into()))?;
        check_keys(obj, KEYS)?;

        let datasets: Vec<Value> =
            field(obj, "datasets")?.ok_or_else(|| Error::BadConfig("missing `datasets`".into()))?;
        let datasets = datasets
            .iter()
            .map(|d| parse_dataset(d, base))
            .collect::<Result<Vec<_>>>()?;

        let er_sizes: Vec<i64> = field(obj, "er_sizes")?.unwrap_or_default();
        if let Some(bad) = er_sizes.iter().find(|&&e| e < 0) {
            return Err(Error::BadConfig(format!("negative er size {bad}")));
        }
        let epochs = field(obj, "epochs")?.unwrap_or(10);
        let grid = match obj.get("grid") {
            None => default_grid(epochs),
            Some(Value::Array(entries)) => entries
                .iter()
                .map(|e| {
                    let mut hp: Hyperparams = serde_json::from_value(e.clone())
                        .map_err(|err| serde_error("grid", err))?;
                    // Epochs are an experiment-wide setting.
                    hp.epochs = epochs;
                    hp.validate()?;
                    Ok(hp)
                })
                .collect::<Result<Vec<_>>>()?,
            Some(_) => return Err(Error::BadConfig("`grid` must be an array".into())),
        };

        let cfg = Self {
            datasets,
            stream: field(obj, "stream")?.unwrap_or(StreamKind::ClassIncremental),
            n_tasks: field(obj, "n_tasks")?.unwrap_or(5),
            ordering_seeds: field(obj, "ordering_seeds")?.unwrap_or_else(|| vec![0]),
            er_sizes: er_sizes.into_iter().map(|e| e as usize).collect(),
            classifiers: field(obj, "classifiers")?.unwrap_or_else(|| {
                vec![
                    ClassifierKind::Mlp,
                    ClassifierKind::Nmc,
                    ClassifierKind::Slda,
                ]
            }),
            grid,
            epochs,
            hidden: field(obj, "hidden")?.unwrap_or(DEFAULT_HIDDEN),
            shrinkage: field(obj, "shrinkage")?.unwrap_or(DEFAULT_SHRINKAGE),
            k: field(obj, "k")?.unwrap_or(DEFAULT_K),
            split: field(obj, "split")?.unwrap_or_default(),
            few_shot_epochs: field(obj, "few_shot_epochs")?.unwrap_or(20),
            output: resolve(
                base,
                field(obj, "output")?.unwrap_or_else(|| PathBuf::from("results")),
            ),
            seed: field(obj, "seed")?.unwrap_or(0),
            workers: field(obj, "workers")?.unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadConfig(m.into()));
        if self.datasets.is_empty() {
            return bad("`datasets` is empty");
        }
        if self.ordering_seeds.is_empty() {
            return bad("`ordering_seeds` is empty");
        }
        if self.classifiers.is_empty() {
            return bad("`classifiers` is empty");
        }
        if self.classifiers.contains(&ClassifierKind::Mlp) {
            if self.er_sizes.is_empty() {
                return bad("`er_sizes` is empty but an MLP is requested");
            }
            if self.grid.is_empty() {
                return bad("`grid` is empty");
            }
        }
        if self.n_tasks == 0 && self.stream == StreamKind::ClassIncremental {
            return bad("`n_tasks` must be positive");
        }
        if self.hidden == 0 || self.k == 0 || self.workers == 0 {
            return bad("`hidden`, `k` and `workers` must be positive");
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return bad("`shrinkage` must lie in (0, 1]");
        }
        self.split.validate()
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    ExperimentConfig::from_json(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "datasets": [{"synth": {"latent_dim": 8, "n_classes": 4, "samples_per_class": 10,
                                "target_similarity": 0.2, "within_class_noise": 0.1}}],
        "er_sizes": [2]
    }"#;

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.epochs, 10);
        assert_eq!(cfg.hidden, 1024);
        assert_eq!(cfg.shrinkage, 1e-4);
        assert_eq!(cfg.k, 20);
        assert_eq!(cfg.n_tasks, 5);
        assert_eq!(cfg.ordering_seeds, vec![0]);
        assert_eq!(cfg.output, PathBuf::from("/tmp/results"));
        assert_eq!(cfg.grid.len(), 12);
    }

    #[test]
    fn rejects_unknown_and_negative() {
        let typo = MINIMAL.replace("\"er_sizes\"", "\"er_size\"");
        assert!(matches!(
            ExperimentConfig::from_json(&typo, Path::new(".")),
            Err(Error::UnknownKey(k)) if k == "er_size"
        ));
        let nested = MINIMAL.replace("\"latent_dim\"", "\"latent_dims\"");
        assert!(matches!(
            ExperimentConfig::from_json(&nested, Path::new(".")),
            Err(Error::UnknownKey(k)) if k == "latent_dims"
        ));
        let negative = MINIMAL.replace("[2]", "[2, -1]");
        assert!(matches!(
            ExperimentConfig::from_json(&negative, Path::new(".")),
            Err(Error::BadConfig(_))
        ));
        let wrong_type = MINIMAL.replace("[2]", "\"two\"");
        assert!(matches!(
            ExperimentConfig::from_json(&wrong_type, Path::new(".")),
            Err(Error::BadConfig(_))
        ));
    }

    #[test]
    fn empty_er_sizes_with_mlp() {
        let none = MINIMAL.replace("[2]", "[]");
        assert!(matches!(
            ExperimentConfig::from_json(&none, Path::new(".")),
            Err(Error::BadConfig(_))
        ));
        let metric_only = none.replace("\"er_sizes\"", "\"classifiers\": [\"nmc\"], \"er_sizes\"");
        assert!(ExperimentConfig::from_json(&metric_only, Path::new(".")).is_ok());
    }

    #[test]
    fn grid_epochs_follow_experiment() {
        let cfg = MINIMAL.replace(
            "\"er_sizes\"",
            "\"epochs\": 3, \"grid\": [{\"learning_rate\": 0.05, \"epochs\": 99}], \"er_sizes\"",
        );
        let cfg = ExperimentConfig::from_json(&cfg, Path::new(".")).unwrap();
        assert_eq!(cfg.grid.len(), 1);
        assert_eq!(cfg.grid[0].epochs, 3);
        assert_eq!(cfg.grid[0].learning_rate, 0.05);
    }
}
