//! Experiment orchestration: datasets x ordering seeds x classifiers x ER
//! sizes, each cell running the full protocol set and written to JSONL and
//! CSV reports.

mod config;

pub use config::{
    parse_config, ClassifierKind, DatasetEntry, DatasetSource, ExperimentConfig, StreamKind,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::classifiers::{tune_first_task, Hyperparams, MlpSpec};
use crate::compute::{
    end2end_er_cost, latent_er_cost, metric_classifier_cost, CostModel, MetricKind,
    SldaCovarianceTerm, TaskLoad,
};
use crate::error::{Error, Result};
use crate::featurestore::{concat_ensemble, read_lcf, split_dataset, EncodedDataset, SplitDataset};
use crate::metrics::{
    run_cl, run_few_shot, run_iid, run_task_iid, table1_report_lenient, AccuracyMatrix,
    ClassifierSpec, MetricsReport, MlpSetup, Table1Inputs,
};
use crate::numeric::DenseMatrix;
use crate::seed;
use crate::similarity::{average_overlap, class_prototype_similarity};
use crate::streams::{build_class_incremental, build_multi_dataset, Stream};
use crate::synth::generate_synthetic_split;

pub const CSV_COLUMNS: &[&str] = &[
    "dataset",
    "encoder",
    "classifier",
    "er_size",
    "ordering_seed",
    "a_cl",
    "a_cl_reinit",
    "a_nmc",
    "a_slda",
    "a_task_cl",
    "a_task_iid",
    "a_iid",
    "a_task_fs",
    "forgetting",
    "relative_forgetting",
    "transfer",
    "interference",
    "interference_total",
    "overlap_avg",
    "class_sim_avg",
    "latent_flops",
    "end2end_flops",
];

/// Metric columns of [`CSV_COLUMNS`] that the summary aggregates.
const METRIC_COLUMNS: std::ops::Range<usize> = 5..22;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub dataset: String,
    pub encoder: String,
    pub classifier: String,
    pub er_size: Option<usize>,
    pub ordering_seed: u64,
    pub status: String,
    pub error: Option<String>,
    #[serde(flatten)]
    pub metrics: MetricsReport,
    pub overlap_avg: Option<f64>,
    pub class_sim_avg: Option<f64>,
    pub latent_flops: Option<f64>,
    pub end2end_flops: Option<f64>,
    pub hyperparams: Option<Vec<Hyperparams>>,
    pub accuracy_matrix: Option<AccuracyMatrix>,
    pub few_shot_flagged_tasks: Vec<usize>,
}

impl CellRecord {
    fn csv_row(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let m = &self.metrics;
        let mut row = vec![
            self.dataset.clone(),
            self.encoder.clone(),
            self.classifier.clone(),
            self.er_size.map(|e| e.to_string()).unwrap_or_default(),
            self.ordering_seed.to_string(),
        ];
        row.extend(
            [
                m.a_cl,
                m.a_cl_reinit,
                m.a_nmc,
                m.a_slda,
                m.a_task_cl,
                m.a_task_iid,
                m.a_iid,
                m.a_task_fs,
                m.forgetting,
                m.relative_forgetting,
                m.transfer,
                m.interference,
                m.interference_total,
                self.overlap_avg,
                self.class_sim_avg,
                self.latent_flops,
                self.end2end_flops,
            ]
            .map(f),
        );
        row
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub cells: Vec<CellRecord>,
    pub cells_jsonl: PathBuf,
    pub cells_csv: PathBuf,
    pub summary_csv: PathBuf,
}

/// A named dataset ready for stream construction.
struct Prepared {
    name: String,
    encoder: String,
    c_enc: f64,
    split: SplitDataset,
}

fn load(entry: &DatasetEntry, cfg: &ExperimentConfig) -> Result<Prepared> {
    let (ds, split): (EncodedDataset, Option<SplitDataset>) = match &entry.source {
        DatasetSource::Lcf(p) => (read_lcf(p)?, None),
        DatasetSource::Ensemble(parts) => {
            let parts = parts.iter().map(read_lcf).collect::<Result<Vec<_>>>()?;
            (concat_ensemble(&parts)?, None)
        }
        DatasetSource::Synth(sc) if sc.test_samples_per_class > 0 => {
            let split = generate_synthetic_split(sc, cfg.split.val)?;
            (split.train.clone(), Some(split))
        }
        DatasetSource::Synth(sc) => (crate::synth::generate_synthetic(sc)?, None),
    };
    let split = match split {
        Some(s) => s,
        None => {
            let (s, warnings) = split_dataset(&ds, cfg.split, seed::derive(cfg.seed, &[0x5b]))?;
            for w in warnings {
                log::warn!(
                    "class {} has {} rows; all kept for training",
                    w.class_id,
                    w.n_rows
                );
            }
            s
        }
    };
    let meta = ds.meta();
    let name = entry.name.clone().unwrap_or_else(|| match &entry.source {
        DatasetSource::Lcf(p) if meta.source_dataset.is_empty() => file_stem(p),
        _ => meta.source_dataset.clone(),
    });
    Ok(Prepared {
        name,
        encoder: meta.encoder_name.clone(),
        c_enc: meta.encode_flops_per_sample as f64,
        split,
    })
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// One unit of work: every cell of one stream (dataset or dataset sequence)
/// under one ordering seed.
struct Job<'a> {
    name: String,
    encoder: String,
    c_enc: f64,
    splits: Vec<&'a SplitDataset>,
    ordering_seed: u64,
}

fn build_stream(job: &Job, cfg: &ExperimentConfig) -> Result<Stream> {
    match cfg.stream {
        StreamKind::ClassIncremental => {
            build_class_incremental(job.splits[0], cfg.n_tasks, job.ordering_seed)
        }
        StreamKind::MultiDataset => {
            let owned: Vec<SplitDataset> = job.splits.iter().map(|s| (*s).clone()).collect();
            let mut s = build_multi_dataset(&owned)?;
            s.ordering_seed = job.ordering_seed;
            Ok(s)
        }
    }
}

/// Hyperparameters tuned on validation data: once on the first task, or
/// per task for the multi-dataset stream.
fn tune(
    stream: &Stream,
    cfg: &ExperimentConfig,
    spec: MlpSpec,
    seed: u64,
) -> Result<Vec<Hyperparams>> {
    if cfg.grid.len() == 1 {
        return Ok(cfg.grid.clone());
    }
    let tasks = match cfg.stream {
        StreamKind::ClassIncremental => &stream.tasks[..1],
        StreamKind::MultiDataset => &stream.tasks[..],
    };
    tasks
        .iter()
        .map(|t| {
            let out = tune_first_task(&t.train, &t.val, spec, &cfg.grid, seed)?;
            log::info!("task {}: picked grid entry {}", t.task_id, out.best_index);
            Ok(out.best)
        })
        .collect()
}

fn schedule(stream: &Stream) -> Vec<TaskLoad> {
    stream
        .tasks
        .iter()
        .map(|t| TaskLoad {
            n_new: t.train.len(),
            classes: t.class_ids.len(),
        })
        .collect()
}

fn stringify<T>(r: &Result<T>) -> std::result::Result<&T, String> {
    r.as_ref().map_err(|e| e.to_string())
}

fn run_job(job: &Job, cfg: &ExperimentConfig) -> Vec<CellRecord> {
    let blank = |classifier: ClassifierKind, er_size: Option<usize>| CellRecord {
        dataset: job.name.clone(),
        encoder: job.encoder.clone(),
        classifier: classifier.as_str().into(),
        er_size,
        ordering_seed: job.ordering_seed,
        status: "ok".into(),
        error: None,
        metrics: MetricsReport {
            er_size,
            ordering_seed: job.ordering_seed,
            ..MetricsReport::default()
        },
        overlap_avg: None,
        class_sim_avg: None,
        latent_flops: None,
        end2end_flops: None,
        hyperparams: None,
        accuracy_matrix: None,
        few_shot_flagged_tasks: Vec::new(),
    };
    let mut kinds = cfg.classifiers.clone();
    kinds.sort_unstable();
    kinds.dedup();
    let cell_keys: Vec<(ClassifierKind, Option<usize>)> = kinds
        .iter()
        .flat_map(|&k| match k {
            ClassifierKind::Mlp => cfg.er_sizes.iter().map(|&e| (k, Some(e))).collect(),
            _ => vec![(k, None)],
        })
        .collect();
    let fail_all = |e: &Error| {
        cell_keys
            .iter()
            .map(|&(k, er)| CellRecord {
                status: "failed".into(),
                error: Some(e.to_string()),
                ..blank(k, er)
            })
            .collect()
    };

    let stream = match build_stream(job, cfg) {
        Ok(s) => s,
        Err(e) => {
            log::error!("{}: cannot build stream: {e}", job.name);
            return fail_all(&e);
        }
    };
    let dim = stream.tasks[0].train.dim();
    let run_seed = seed::derive(cfg.seed, &[0x4c, job.ordering_seed]);

    let train_parts: Vec<&DenseMatrix> = stream.tasks.iter().map(|t| t.train.features()).collect();
    let overlap_avg = if train_parts.len() >= 2 {
        average_overlap(&train_parts, cfg.k)
            .map_err(|e| log::warn!("{}: overlap unavailable: {e}", job.name))
            .ok()
    } else {
        None
    };
    let trains: Vec<&EncodedDataset> = stream.tasks.iter().map(|t| &t.train).collect();
    let class_sim_avg = EncodedDataset::vstack(&trains)
        .and_then(|all| class_prototype_similarity(&all))
        .map(|s| s.average)
        .map_err(|e| log::warn!("{}: prototype similarity unavailable: {e}", job.name))
        .ok();
    let cost = CostModel::new(job.c_enc, dim, cfg.hidden);
    let sched = schedule(&stream);
    let n_train: usize = sched.iter().map(|t| t.n_new).sum();

    let metric_cl = |kind: ClassifierKind| -> Option<Result<crate::metrics::ClRun>> {
        let spec = match kind {
            ClassifierKind::Nmc => ClassifierSpec::Nmc,
            ClassifierKind::Slda => ClassifierSpec::Slda {
                shrinkage: cfg.shrinkage,
            },
            ClassifierKind::Mlp => return None,
        };
        kinds
            .contains(&kind)
            .then(|| run_cl(&stream, &spec, 0, false, run_seed))
    };
    let nmc_cl = metric_cl(ClassifierKind::Nmc);
    let slda_cl = metric_cl(ClassifierKind::Slda);
    let a_nmc = nmc_cl
        .as_ref()
        .and_then(|r| r.as_ref().ok())
        .map(|r| r.a_cl);
    let a_slda = slda_cl
        .as_ref()
        .and_then(|r| r.as_ref().ok())
        .map(|r| r.a_cl);

    let mut cells = Vec::new();
    for kind in kinds.iter().copied() {
        let spec = match kind {
            ClassifierKind::Mlp => {
                let mlp_spec = MlpSpec {
                    input_dim: dim,
                    hidden: cfg.hidden,
                };
                match tune(&stream, cfg, mlp_spec, run_seed) {
                    Ok(hps) => ClassifierSpec::Mlp(MlpSetup {
                        spec: mlp_spec,
                        hyperparams: hps,
                        few_shot_epochs: cfg.few_shot_epochs,
                    }),
                    Err(e) => {
                        log::error!("{}: tuning failed: {e}", job.name);
                        cells.extend(cfg.er_sizes.iter().map(|&er| CellRecord {
                            status: "failed".into(),
                            error: Some(e.to_string()),
                            ..blank(kind, Some(er))
                        }));
                        continue;
                    }
                }
            }
            ClassifierKind::Nmc => ClassifierSpec::Nmc,
            ClassifierKind::Slda => ClassifierSpec::Slda {
                shrinkage: cfg.shrinkage,
            },
        };
        let task_iid = run_task_iid(&stream, &spec, run_seed);
        let iid = run_iid(&stream, &spec, run_seed);
        let few_shot = run_few_shot(&stream, &spec, run_seed);
        let ers: Vec<Option<usize>> = match kind {
            ClassifierKind::Mlp => cfg.er_sizes.iter().map(|&e| Some(e)).collect(),
            _ => vec![None],
        };
        for er in ers {
            let outcome = (|| -> std::result::Result<CellRecord, String> {
                let (cl, reinit) = match kind {
                    ClassifierKind::Mlp => {
                        let e = er.unwrap_or(0);
                        let cl = run_cl(&stream, &spec, e, false, run_seed)
                            .map_err(|e| e.to_string())?;
                        let re =
                            run_cl(&stream, &spec, e, true, run_seed).map_err(|e| e.to_string())?;
                        (cl, Some(re.a_cl))
                    }
                    ClassifierKind::Nmc => (
                        stringify(nmc_cl.as_ref().expect("requested"))?.clone(),
                        None,
                    ),
                    ClassifierKind::Slda => (
                        stringify(slda_cl.as_ref().expect("requested"))?.clone(),
                        None,
                    ),
                };
                let few = stringify(&few_shot)?;
                let mut metrics = table1_report_lenient(
                    &cl.matrix,
                    &Table1Inputs {
                        a_cl: cl.a_cl,
                        a_cl_reinit: reinit,
                        a_iid: Some(*stringify(&iid)?),
                        a_task_iid: Some(*stringify(&task_iid)?),
                        a_task_fs: Some(few.accuracy),
                    },
                )
                .map_err(|e| e.to_string())?;
                metrics.a_nmc = a_nmc;
                metrics.a_slda = a_slda;
                metrics.er_size = er;
                metrics.ordering_seed = job.ordering_seed;
                let (latent, end2end, hps) = match &spec {
                    ClassifierSpec::Mlp(setup) => {
                        let epochs = setup.hp_for(0).epochs;
                        let e = er.unwrap_or(0);
                        (
                            Some(
                                latent_er_cost(&sched, epochs, e, &cost)
                                    .map_err(|e| e.to_string())?
                                    .total(),
                            ),
                            Some(
                                end2end_er_cost(&sched, epochs, e, &cost)
                                    .map_err(|e| e.to_string())?
                                    .total(),
                            ),
                            Some(setup.hyperparams.clone()),
                        )
                    }
                    ClassifierSpec::Nmc | ClassifierSpec::Slda { .. } => {
                        let mk = if kind == ClassifierKind::Nmc {
                            MetricKind::Nmc
                        } else {
                            MetricKind::Slda
                        };
                        let flops = metric_classifier_cost(
                            mk,
                            n_train,
                            stream.n_classes_total,
                            &cost,
                            SldaCovarianceTerm::Literal,
                        )
                        .map_err(|e| e.to_string())?;
                        (Some(flops), None, None)
                    }
                };
                Ok(CellRecord {
                    metrics,
                    overlap_avg,
                    class_sim_avg,
                    latent_flops: latent,
                    end2end_flops: end2end,
                    hyperparams: hps,
                    accuracy_matrix: Some(cl.matrix),
                    few_shot_flagged_tasks: few.flagged_tasks.clone(),
                    ..blank(kind, er)
                })
            })();
            cells.push(outcome.unwrap_or_else(|e| {
                log::error!("{} {} er={er:?}: {e}", job.name, kind.as_str());
                CellRecord {
                    status: "failed".into(),
                    error: Some(e),
                    overlap_avg,
                    class_sim_avg,
                    ..blank(kind, er)
                }
            }));
        }
    }
    cells
}

fn jobs<'a>(cfg: &ExperimentConfig, prepared: &'a [Prepared]) -> Vec<Job<'a>> {
    let mut out = Vec::new();
    match cfg.stream {
        StreamKind::ClassIncremental => {
            for p in prepared {
                for &s in &cfg.ordering_seeds {
                    out.push(Job {
                        name: p.name.clone(),
                        encoder: p.encoder.clone(),
                        c_enc: p.c_enc,
                        splits: vec![&p.split],
                        ordering_seed: s,
                    });
                }
            }
        }
        StreamKind::MultiDataset => {
            let join =
                |f: fn(&Prepared) -> &str| prepared.iter().map(f).collect::<Vec<_>>().join("+");
            let mut encoders: Vec<&str> = prepared.iter().map(|p| p.encoder.as_str()).collect();
            encoders.dedup();
            for &s in &cfg.ordering_seeds {
                out.push(Job {
                    name: join(|p| &p.name),
                    encoder: encoders.join("+"),
                    // Per-sample encoding cost is averaged over the datasets.
                    c_enc: prepared.iter().map(|p| p.c_enc).sum::<f64>() / prepared.len() as f64,
                    splits: prepared.iter().map(|p| &p.split).collect(),
                    ordering_seed: s,
                });
            }
        }
    }
    out
}

/// Runs every job on `workers` threads. Results keep job order, so output
/// does not depend on scheduling.
fn run_jobs(jobs: &[Job], cfg: &ExperimentConfig) -> Vec<CellRecord> {
    let slots: Vec<Mutex<Option<Vec<CellRecord>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.workers.min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                log::info!("{} seed {}: start", job.name, job.ordering_seed);
                let cells = run_job(job, cfg);
                *slots[i].lock().expect("poisoned result slot") = Some(cells);
            });
        }
    });
    slots
        .into_iter()
        .flat_map(|s| {
            s.into_inner()
                .expect("poisoned result slot")
                .unwrap_or_default()
        })
        .collect()
}

/// Runs the whole experiment and writes `cells.jsonl`, `cells.csv` and
/// `summary.csv` into `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let prepared = cfg
        .datasets
        .iter()
        .map(|d| load(d, cfg))
        .collect::<Result<Vec<_>>>()?;
    let cells = run_jobs(&jobs(cfg, &prepared), cfg);

    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let cells_jsonl = cfg.output.join("cells.jsonl");
    let cells_csv = cfg.output.join("cells.csv");
    let summary_csv = cfg.output.join("summary.csv");
    write_jsonl(&cells_jsonl, &cells)?;
    write_csv(&cells_csv, &cells)?;
    write_summary(&summary_csv, &cells)?;
    Ok(ExperimentReport {
        cells,
        cells_jsonl,
        cells_csv,
        summary_csv,
    })
}

fn write_jsonl(path: &Path, cells: &[CellRecord]) -> Result<()> {
    let mut text = String::new();
    for c in cells {
        text.push_str(&serde_json::to_string(c).map_err(|e| Error::Malformed(e.to_string()))?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Malformed(format!("{other:?}")),
    }
}

pub fn write_csv(path: &Path, cells: &[CellRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CSV_COLUMNS)
        .map_err(|e| csv_error(path, e))?;
    for c in cells {
        w.write_record(c.csv_row())
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mean and sample standard deviation of every metric across ordering seeds,
/// one row per (dataset, encoder, classifier, ER size). Failed cells are
/// left out of the statistics but counted.
pub fn write_summary(path: &Path, cells: &[CellRecord]) -> Result<()> {
    let mut groups: BTreeMap<[String; 4], Vec<&CellRecord>> = BTreeMap::new();
    for c in cells {
        let key = [
            c.dataset.clone(),
            c.encoder.clone(),
            c.classifier.clone(),
            c.er_size.map(|e| e.to_string()).unwrap_or_default(),
        ];
        groups.entry(key).or_default().push(c);
    }
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = CSV_COLUMNS[..4].iter().map(|s| s.to_string()).collect();
    header.extend(["n_seeds".to_string(), "n_failed".to_string()]);
    for col in &CSV_COLUMNS[METRIC_COLUMNS] {
        header.push(format!("{col}_mean"));
        header.push(format!("{col}_std"));
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (key, members) in groups {
        let ok: Vec<Vec<String>> = members
            .iter()
            .filter(|c| c.status == "ok")
            .map(|c| c.csv_row())
            .collect();
        let mut row: Vec<String> = key.to_vec();
        row.push(members.len().to_string());
        row.push((members.len() - ok.len()).to_string());
        for col in METRIC_COLUMNS {
            let vals: Vec<f64> = ok.iter().filter_map(|r| r[col].parse().ok()).collect();
            let (mean, std) = mean_std(&vals);
            row.push(mean.map(|v| v.to_string()).unwrap_or_default());
            row.push(std.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (Some(mean), None);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path, extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"{{
            "datasets": [{{"synth": {{"latent_dim": 8, "n_classes": 4, "samples_per_class": 12,
                "test_samples_per_class": 4, "target_similarity": 0.3, "within_class_noise": 0.2,
                "name": "toy"}}}}],
            "n_tasks": 2, "er_sizes": [0, 2], "ordering_seeds": [1, 2],
            "hidden": 8, "epochs": 2, "k": 2,
            "grid": [{{"learning_rate": 0.05}}, {{"learning_rate": 0.01}}],
            "output": "out" {extra}
        }}"#
        );
        ExperimentConfig::from_json(&text, dir).unwrap()
    }

    #[test]
    fn cell_enumeration_and_row_count() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&cfg(dir.path(), "")).unwrap();
        // per seed: 2 MLP cells + NMC + SLDA
        assert_eq!(report.cells.len(), 8);
        assert!(
            report.cells.iter().all(|c| c.status == "ok"),
            "{:?}",
            report.cells
        );
        let csv = std::fs::read_to_string(&report.cells_csv).unwrap();
        assert_eq!(csv.lines().count(), 9);
        assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));
        let summary = std::fs::read_to_string(&report.summary_csv).unwrap();
        assert_eq!(summary.lines().count(), 5);
        let jsonl = std::fs::read_to_string(&report.cells_jsonl).unwrap();
        assert_eq!(jsonl.lines().count(), 8);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let one = run_experiment(&cfg(a.path(), "")).unwrap();
        let three = run_experiment(&cfg(b.path(), r#", "workers": 3"#)).unwrap();
        assert_eq!(
            std::fs::read(&one.cells_csv).unwrap(),
            std::fs::read(&three.cells_csv).unwrap()
        );
    }

    #[test]
    fn missing_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{"datasets": [{"path": "nope.lcf"}], "er_sizes": [1]}"#;
        let cfg = ExperimentConfig::from_json(text, dir.path()).unwrap();
        match run_experiment(&cfg) {
            Err(Error::Io { path, .. }) => assert!(path.ends_with("nope.lcf")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn failed_cells_still_reported() {
        let dir = tempfile::tempdir().unwrap();
        let bad = cfg(dir.path(), r#", "n_tasks": 9"#);
        let report = run_experiment(&bad).unwrap();
        assert_eq!(report.cells.len(), 8);
        assert!(report.cells.iter().all(|c| c.status == "failed"));
        let csv = std::fs::read_to_string(&report.cells_csv).unwrap();
        assert_eq!(csv.lines().count(), 9);
    }
}
