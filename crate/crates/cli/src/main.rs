//! `demospeedup`: estimate action entropy, segment, and accelerate
//! demonstration datasets from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use demospeedup::accelerate::AccelerationConfig;
use demospeedup::entropy::{Bandwidth, DimensionMode, EntropyMode};
use demospeedup::pipeline::{self, Method, PipelineRunConfig, SamplerChoice};
use demospeedup::segment::{HdbscanParams, IsolationForestParams, SegmentConfig};
use demospeedup::testkit::read_profiles;
use demospeedup::Error;
use log::{debug, info};

#[derive(Parser, Debug)]
#[command(name = "demospeedup", version, about = "Entropy-guided acceleration of demonstration datasets")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic demoset with planted precision segments.
    Generate {
        /// JSON noise profile (one object or an array).
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate per-frame action entropy; writes entropy_<i>.csv.
    Estimate {
        #[command(flatten)]
        io: DatasetOut,
        #[command(flatten)]
        entropy: EntropyArgs,
    },
    /// Label precision and casual frames; writes labels_<i>.json.
    Segment {
        #[command(flatten)]
        io: DatasetOut,
        /// Directory holding entropy_<i>.csv (defaults to --out).
        #[arg(long)]
        entropy: Option<PathBuf>,
        #[command(flatten)]
        segment: SegmentArgs,
    },
    /// Build the accelerated dataset, samples.jsonl and stats.json.
    Accelerate {
        #[command(flatten)]
        io: DatasetOut,
        /// Directory holding labels_<i>.json (needed by demospeedup).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Directory holding entropy_<i>.csv (needed by awe).
        #[arg(long)]
        entropy: Option<PathBuf>,
        #[command(flatten)]
        accel: AccelArgs,
    },
    /// Render plot_<i>.svg from entropy and labels.
    Plot {
        #[command(flatten)]
        io: DatasetOut,
        #[arg(long)]
        entropy: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Estimate, segment, accelerate and plot in one go, under --out.
    Run {
        #[command(flatten)]
        io: DatasetOut,
        #[command(flatten)]
        entropy: EntropyArgs,
        #[command(flatten)]
        segment: SegmentArgs,
        #[command(flatten)]
        accel: AccelArgs,
    },
}

#[derive(Args, Debug)]
struct DatasetOut {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EntropyArgs {
    /// Action sample source: synthetic or file.
    #[arg(long, default_value = "synthetic")]
    sampler: SamplerChoice,
    /// Chunks drawn per frame.
    #[arg(long, default_value_t = 100)]
    n_samples: usize,
    /// Proxy chunk length.
    #[arg(long, default_value_t = 10)]
    chunk: usize,
    /// paper or resubstitution.
    #[arg(long, default_value = "paper")]
    entropy_mode: EntropyMode,
    /// sum (per-dimension entropies) or joint (product kernel).
    #[arg(long, default_value = "sum")]
    dims: DimensionMode,
    /// silverman or a fixed positive bandwidth.
    #[arg(long, default_value = "silverman")]
    bandwidth: Bandwidth,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    /// Fraction of frames treated as outliers before clustering.
    #[arg(long, default_value_t = 0.05)]
    contamination: f64,
    #[arg(long, default_value_t = 100)]
    n_trees: usize,
    /// Defaults to max(5, ceil(0.02 T)).
    #[arg(long)]
    min_cluster_size: Option<usize>,
    /// Defaults to the minimum cluster size.
    #[arg(long)]
    min_samples: Option<usize>,
    /// Weight of the time coordinate in clustering.
    #[arg(long, default_value_t = 1.0)]
    time_weight: f64,
}

#[derive(Args, Debug)]
struct AccelArgs {
    /// demospeedup, constant:<r>, awe:<eps> or contact:<window>.
    #[arg(long, default_value = "demospeedup")]
    method: Method,
    #[arg(long, default_value_t = 2)]
    r_low: usize,
    #[arg(long, default_value_t = 4)]
    r_high: usize,
    /// Accelerated chunk length.
    #[arg(long, default_value_t = 24)]
    k_acc: usize,
}

fn run_config(io: &DatasetOut, seed: u64) -> PipelineRunConfig {
    let mut cfg = PipelineRunConfig::new(&io.dataset, &io.out);
    cfg.seed = seed;
    cfg
}

fn apply_entropy(cfg: &mut PipelineRunConfig, args: &EntropyArgs) {
    cfg.sampler = args.sampler;
    cfg.entropy.n_samples = args.n_samples;
    cfg.entropy.chunk_len = args.chunk;
    cfg.entropy.mode = args.entropy_mode;
    cfg.entropy.dims = args.dims;
    cfg.entropy.bandwidth = args.bandwidth;
}

fn apply_segment(cfg: &mut PipelineRunConfig, args: &SegmentArgs) {
    cfg.segment = SegmentConfig {
        iforest: IsolationForestParams {
            n_trees: args.n_trees,
            contamination: args.contamination,
            ..IsolationForestParams::default()
        },
        hdbscan: HdbscanParams {
            min_cluster_size: args.min_cluster_size,
            min_samples: args.min_samples,
        },
        time_weight: args.time_weight,
    };
}

fn apply_accel(cfg: &mut PipelineRunConfig, args: &AccelArgs) {
    cfg.acceleration = AccelerationConfig {
        r_low: args.r_low,
        r_high: args.r_high,
        k_acc: args.k_acc,
    };
}

fn required(dir: Option<PathBuf>, flag: &str, method: Method) -> Result<PathBuf, Error> {
    dir.ok_or_else(|| Error::InvalidConfig(format!("method {method} needs --{flag}")))
}

fn accelerate(cfg: &PipelineRunConfig, method: Method, labels: &Path, entropy: &Path) -> Result<(), Error> {
    let stats = pipeline::run_accelerate(cfg, method, labels, entropy)?;
    println!(
        "{method}: mean speedup {:.3}x (min {:.3}x, max {:.3}x) over {} trajectories",
        stats.mean,
        stats.min,
        stats.max,
        stats.trajectories.len()
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    let seed = cli.seed;
    match cli.command {
        Command::Generate { profile, out } => pipeline::run_generate(&read_profiles(&profile)?, &out),
        Command::Estimate { io, entropy } => {
            let mut cfg = run_config(&io, seed);
            apply_entropy(&mut cfg, &entropy);
            pipeline::run_estimate(&cfg).map(drop)
        }
        Command::Segment { io, entropy, segment } => {
            let mut cfg = run_config(&io, seed);
            apply_segment(&mut cfg, &segment);
            let entropy = entropy.unwrap_or_else(|| io.out.clone());
            pipeline::run_segment(&cfg, &entropy).map(drop)
        }
        Command::Accelerate {
            io,
            labels,
            entropy,
            accel,
        } => {
            let mut cfg = run_config(&io, seed);
            apply_accel(&mut cfg, &accel);
            let method = accel.method;
            let labels = match method {
                Method::DemoSpeedup => required(labels, "labels", method)?,
                _ => labels.unwrap_or_default(),
            };
            let entropy = match method {
                Method::Awe(_) => required(entropy, "entropy", method)?,
                _ => entropy.unwrap_or_default(),
            };
            accelerate(&cfg, method, &labels, &entropy)
        }
        Command::Plot { io, entropy, labels } => {
            let written = pipeline::run_plot(&io.dataset, &entropy, &labels, &io.out)?;
            info!("wrote {} plots", written.len());
            Ok(())
        }
        Command::Run {
            io,
            entropy,
            segment,
            accel,
        } => {
            let mut cfg = run_config(&io, seed);
            apply_entropy(&mut cfg, &entropy);
            apply_segment(&mut cfg, &segment);
            apply_accel(&mut cfg, &accel);
            let (entropy_dir, labels_dir) = (io.out.join("entropy"), io.out.join("labels"));
            cfg.out = entropy_dir.clone();
            pipeline::run_estimate(&cfg)?;
            cfg.out = labels_dir.clone();
            pipeline::run_segment(&cfg, &entropy_dir)?;
            cfg.out = io.out.join("accelerated");
            accelerate(&cfg, accel.method, &labels_dir, &entropy_dir)?;
            pipeline::run_plot(&io.dataset, &entropy_dir, &labels_dir, &io.out.join("plots")).map(drop)
        }
    }
}

fn report(err: &Error) {
    let mut msg = format!("error: {err}");
    let mut source = std::error::Error::source(err);
    while let Some(s) = source {
        // thiserror messages already embed their direct source
        if !msg.contains(&s.to_string()) {
            msg.push_str(&format!(": {s}"));
        }
        source = s.source();
    }
    eprintln!("{msg}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEMOSPEEDUP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(3);
        }
    }
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            debug!("{e:?}");
            report(&e);
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
        Err(_) => ExitCode::from(3),
    }
}
