use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use latentcl::compute::{end2end_er_cost, latent_er_cost, uniform_schedule, CostModel};
use latentcl::featurestore::{read_lcf, split_dataset, write_lcf, SplitFractions};
use latentcl::numeric::DenseMatrix;
use latentcl::runner::{parse_config, run_experiment};
use latentcl::similarity::{class_prototype_similarity, overlap_matrix, DEFAULT_K};
use latentcl::streams::build_class_incremental;
use latentcl::synth::{generate_synthetic, SynthConfig};
use latentcl::{Error, Result};

#[derive(Parser)]
#[command(
    name = "latentcl",
    version,
    about = "Continual learning benchmarks on frozen-encoder features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config
    Run {
        config: PathBuf,
        /// Override the config's worker count
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Generate a synthetic dataset from a JSON config
    Synth { config: PathBuf, out: PathBuf },
    /// Task-pair subspace overlaps and class prototype similarity
    Similarity {
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        tasks: usize,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Seed of the class-to-task assignment
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Task overlap matrix (CSV)
        #[arg(long)]
        out: PathBuf,
        /// Class cosine similarity matrix (CSV)
        #[arg(long)]
        class_out: Option<PathBuf>,
    },
    /// Analytic training cost of latent versus end-to-end replay
    ComputeModel {
        /// Encoder flops per sample
        #[arg(long)]
        c_enc: f64,
        #[arg(long, default_value_t = 768)]
        latent_dim: usize,
        #[arg(long, default_value_t = 1024)]
        hidden: usize,
        #[arg(long, default_value_t = 5)]
        tasks: usize,
        #[arg(long, default_value_t = 20)]
        classes_per_task: usize,
        #[arg(long, default_value_t = 500)]
        samples_per_class: usize,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        /// Replay buffer size per class
        #[arg(long, default_value_t = 20)]
        er: usize,
        /// Print running totals instead of per-task costs
        #[arg(long)]
        cumulative: bool,
    },
    /// Describe an LCF file
    Info { input: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, workers } => {
            let mut cfg = parse_config(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let report = run_experiment(&cfg)?;
            let failed = report.cells.iter().filter(|c| c.status != "ok").count();
            println!(
                "{} cells ({failed} failed) -> {}",
                report.cells.len(),
                report.cells_csv.display()
            );
            Ok(())
        }
        Command::Synth { config, out } => {
            let text = std::fs::read_to_string(&config).map_err(|e| io_err(&config, e))?;
            let cfg: SynthConfig = serde_json::from_str(&text)
                .map_err(|e| Error::BadConfig(format!("{}: {e}", config.display())))?;
            let ds = generate_synthetic(&cfg)?;
            write_lcf(&ds, &out)?;
            println!("{} rows x {} dims -> {}", ds.len(), ds.dim(), out.display());
            Ok(())
        }
        Command::Similarity {
            input,
            tasks,
            k,
            seed,
            out,
            class_out,
        } => similarity(&input, tasks, k, seed, &out, class_out.as_deref()),
        Command::ComputeModel {
            c_enc,
            latent_dim,
            hidden,
            tasks,
            classes_per_task,
            samples_per_class,
            epochs,
            er,
            cumulative,
        } => {
            let cost = CostModel::new(c_enc, latent_dim, hidden);
            let sched = uniform_schedule(tasks, classes_per_task, samples_per_class);
            let latent = latent_er_cost(&sched, epochs, er, &cost)?;
            let e2e = end2end_er_cost(&sched, epochs, er, &cost)?;
            let (l, e) = if cumulative {
                (latent.cumulative, e2e.cumulative)
            } else {
                (latent.per_task, e2e.per_task)
            };
            let mut stdout = std::io::stdout().lock();
            let w = |s: &mut std::io::StdoutLock, line: String| {
                writeln!(s, "{line}").map_err(|e| io_err(Path::new("<stdout>"), e))
            };
            w(&mut stdout, "task,latent_flops,end2end_flops,ratio".into())?;
            for (t, (a, b)) in l.iter().zip(&e).enumerate() {
                w(&mut stdout, format!("{t},{a:e},{b:e},{}", b / a))?;
            }
            Ok(())
        }
        Command::Info { input } => {
            let ds = read_lcf(&input)?;
            let m = ds.meta();
            println!("encoder: {}", m.encoder_name);
            println!("source: {}", m.source_dataset);
            println!("rows: {}", ds.len());
            println!("latent_dim: {}", ds.dim());
            println!("encode_flops_per_sample: {}", m.encode_flops_per_sample);
            println!("classes: {}", ds.n_classes());
            for (c, rows) in ds.rows_by_class() {
                println!("  {c}\t{}\t{}", ds.class_names()[c as usize], rows.len());
            }
            Ok(())
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn similarity(
    input: &Path,
    n_tasks: usize,
    k: usize,
    seed: u64,
    out: &Path,
    class_out: Option<&Path>,
) -> Result<()> {
    let ds = read_lcf(input)?;
    let (all, _) = split_dataset(&ds, SplitFractions::new(1.0, 0.0, 0.0)?, 0)?;
    let stream = build_class_incremental(&all, n_tasks, seed)?;
    let parts: Vec<&DenseMatrix> = stream.tasks.iter().map(|t| t.train.features()).collect();
    let m = overlap_matrix(&parts, k)?;

    let mut csv = String::from("task");
    for j in 0..m.cols() {
        csv.push_str(&format!(",{j}"));
    }
    csv.push('\n');
    for i in 0..m.rows() {
        csv.push_str(&i.to_string());
        for v in m.row(i) {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    std::fs::write(out, csv).map_err(|e| io_err(out, e))?;

    let n = m.rows();
    let pairs: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect();
    let overlap_avg = pairs.iter().sum::<f64>() / pairs.len() as f64;
    let protos = class_prototype_similarity(&ds)?;
    println!("overlap_avg,{overlap_avg}");
    println!("class_sim_avg,{}", protos.average);

    if let Some(path) = class_out {
        let names = ds.class_names();
        let mut csv = String::from("class");
        for &c in &protos.class_ids {
            csv.push_str(&format!(",{}", quote(&names[c as usize])));
        }
        csv.push('\n');
        for (i, &c) in protos.class_ids.iter().enumerate() {
            csv.push_str(&quote(&names[c as usize]));
            for v in protos.matrix.row(i) {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
        std::fs::write(path, csv).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
