//! Command-line driver for PU-index drift detection experiments.
//!
//! Subcommands: `run` (one experiment), `compare` (detector table),
//! `gen` (export a stream as CSV), `bench` (incremental vs batch timing),
//! `proptest` (property suites). Exit codes: 0 success, 2 configuration
//! error, 3 assertion failure.

use clap::{Args, Parser, Subcommand};
use pudd::bucketing::BucketingConfig;
use pudd::detector::PuSample;
use pudd::harness::{
    compare_detectors, run_experiment, equal_proportion_suite, equal_error_witness_suite, DetectorSpec,
    ExperimentConfig, StreamKind, StreamSpec, TrainingRegime,
};
use pudd::incremental::bench_incremental_vs_batch;
use pudd::streams::{export_csv, DriftSchedule};
use rand::{Rng, SeedableRng};
use serde::Deserialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_ASSERTION: u8 = 3;

#[derive(Parser)]
#[command(name = "pudd", about = "PU-index concept drift detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one prequential experiment and report metrics.
    Run(RunArgs),
    /// Run several detectors on the same stream and tabulate them.
    Compare(CompareArgs),
    /// Export a synthetic stream to CSV.
    Gen(GenArgs),
    /// Time the incremental detector against batch recomputation.
    Bench(BenchArgs),
    /// Run the detector property suites.
    Proptest(ProptestArgs),
}

/// Options shared by `run` and `compare`. Command-line flags override
/// values from `--config`.
#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML config file with `[stream]`, `[detector]`, `[classifier]`,
    /// `[run]` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stream name: sea0, sea10, sea20, sine, mixed.
    #[arg(long)]
    stream: Option<String>,
    /// Alarm threshold on the minimum p-value.
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of PU-index buckets.
    #[arg(long)]
    k: Option<usize>,
    /// Amplify coefficient for the bucketing step.
    #[arg(long)]
    theta: Option<f64>,
    /// Base RNG seed; repetition i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of repetitions with distinct seeds.
    #[arg(long)]
    reps: Option<usize>,
    /// Instances per chunk.
    #[arg(long = "chunk-size")]
    chunk_size: Option<usize>,
    /// Total chunks per run.
    #[arg(long)]
    chunks: Option<usize>,
    /// Chunks between concept changes.
    #[arg(long)]
    period: Option<usize>,
    /// Generate a stationary stream (no concept changes).
    #[arg(long)]
    stationary: bool,
    /// Training regime: incremental or train_once.
    #[arg(long)]
    regime: Option<String>,
    /// Output prefix; writes `<out>_run<seed>.csv` files and
    /// `<out>_summary.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Detector: pudd-batch, pudd-incremental, ddm, ph, none.
    #[arg(long)]
    detector: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Detector arms (repeatable).
    #[arg(long = "detector", required = true)]
    detectors: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    /// Stream name: sea0, sea10, sea20, sine, mixed.
    #[arg(long, default_value = "sea0")]
    stream: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    chunks: usize,
    #[arg(long = "chunk-size", default_value_t = 1000)]
    chunk_size: usize,
    #[arg(long, default_value_t = 10)]
    period: usize,
    #[arg(long)]
    stationary: bool,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Stream length in instances.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1e-5)]
    sigma: f64,
    #[arg(long = "chunk-size", default_value_t = 1000)]
    chunk_size: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Inject a PU distribution shift every this many chunks.
    #[arg(long = "drift-every")]
    drift_every: Option<usize>,
}

#[derive(Args)]
struct ProptestArgs {
    /// Window pairs for the equal-proportion suite.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    /// Seeded runs for the equal-error counterexample suite.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 1000)]
    window: usize,
    #[arg(long, default_value_t = 1e-5)]
    sigma: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

/// Shape of the optional TOML configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    stream: FileStream,
    #[serde(default)]
    detector: FileDetector,
    #[serde(default)]
    classifier: FileClassifier,
    #[serde(default)]
    run: FileRun,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileStream {
    kind: Option<String>,
    seed: Option<u64>,
    chunk_size: Option<usize>,
    chunks: Option<usize>,
    period: Option<usize>,
    stationary: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDetector {
    kind: Option<String>,
    sigma: Option<f64>,
    k: Option<usize>,
    theta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileClassifier {
    regime: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRun {
    reps: Option<usize>,
    out: Option<PathBuf>,
}

struct Resolved {
    stream: StreamSpec,
    detector_name: String,
    sigma: f64,
    bucketing: BucketingConfig,
    regime: TrainingRegime,
    reps: usize,
    out: Option<PathBuf>,
}

fn resolve(common: &CommonArgs, detector: Option<&str>) -> Result<Resolved, String> {
    let file = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            toml::from_str::<FileConfig>(&text).map_err(|e| format!("bad config file: {e}"))?
        }
        None => FileConfig::default(),
    };

    let kind_name = common
        .stream
        .clone()
        .or(file.stream.kind)
        .unwrap_or_else(|| "sea0".to_string());
    let kind: StreamKind = kind_name.parse().map_err(|e| format!("{e}"))?;
    let schedule = DriftSchedule {
        period_chunks: common.period.or(file.stream.period).unwrap_or(10),
        chunk_size: common.chunk_size.or(file.stream.chunk_size).unwrap_or(1000),
        n_chunks: common.chunks.or(file.stream.chunks).unwrap_or(100),
    };
    let stream = StreamSpec {
        kind,
        seed: common.seed.or(file.stream.seed).unwrap_or(42),
        schedule,
        drifting: !(common.stationary || file.stream.stationary.unwrap_or(false)),
    };

    let sigma = common.sigma.or(file.detector.sigma).unwrap_or(1e-5);
    if !(0.0..1.0).contains(&sigma) || sigma == 0.0 {
        return Err(format!("sigma must be in (0, 1), got {sigma}"));
    }
    let mut bucketing = BucketingConfig::with_k(common.k.or(file.detector.k).unwrap_or(5));
    if let Some(theta) = common.theta.or(file.detector.theta) {
        bucketing.theta = theta;
    }

    let regime = common
        .regime
        .clone()
        .or(file.classifier.regime)
        .unwrap_or_else(|| "incremental".to_string())
        .parse::<TrainingRegime>()
        .map_err(|e| format!("{e}"))?;

    Ok(Resolved {
        stream,
        detector_name: detector
            .map(str::to_string)
            .or(file.detector.kind)
            .unwrap_or_else(|| "pudd-batch".to_string()),
        sigma,
        bucketing,
        regime,
        reps: common.reps.or(file.run.reps).unwrap_or(10),
        out: common.out.clone().or(file.run.out),
    })
}

fn experiment_config(r: &Resolved, detector_name: &str) -> Result<ExperimentConfig, String> {
    let detector = DetectorSpec::parse(detector_name, r.sigma, r.bucketing.clone())
        .map_err(|e| format!("{e}"))?;
    Ok(ExperimentConfig {
        stream: r.stream.clone(),
        detector,
        regime: r.regime,
        repetitions: r.reps,
    })
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode, String> {
    let resolved = resolve(&args.common, args.detector.as_deref())?;
    let config = experiment_config(&resolved, &resolved.detector_name.clone())?;
    let result = run_experiment(&config).map_err(|e| format!("{e}"))?;

    if let Some(prefix) = &resolved.out {
        let prefix = prefix.to_string_lossy();
        for run in &result.runs {
            let path = format!("{prefix}_run{}.csv", run.seed);
            let mut w = BufWriter::new(File::create(&path).map_err(|e| format!("{path}: {e}"))?);
            run.write_csv(&mut w).map_err(|e| format!("{path}: {e}"))?;
        }
        let path = format!("{prefix}_summary.json");
        let mut w = BufWriter::new(File::create(&path).map_err(|e| format!("{path}: {e}"))?);
        serde_json::to_writer_pretty(&mut w, &result.summary_json())
            .map_err(|e| format!("{path}: {e}"))?;
        w.write_all(b"\n").ok();
        eprintln!(
            "wrote {} run files and {path}",
            result.runs.len()
        );
    }
    println!("{}", serde_json::to_string_pretty(&result.summary_json()).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: &CompareArgs) -> Result<ExitCode, String> {
    let resolved = resolve(&args.common, None)?;
    let configs = args
        .detectors
        .iter()
        .map(|d| experiment_config(&resolved, d))
        .collect::<Result<Vec<_>, _>>()?;
    let table = compare_detectors(&configs).map_err(|e| format!("{e}"))?;
    print!("{table}");
    if let Some(prefix) = &resolved.out {
        let path = format!("{}_compare.csv", prefix.to_string_lossy());
        let mut w = BufWriter::new(File::create(&path).map_err(|e| format!("{path}: {e}"))?);
        table.write_csv(&mut w).map_err(|e| format!("{path}: {e}"))?;
        eprintln!("wrote {path}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(args: &GenArgs) -> Result<ExitCode, String> {
    let kind: StreamKind = args.stream.parse().map_err(|e| format!("{e}"))?;
    let spec = StreamSpec {
        kind,
        seed: args.seed,
        schedule: DriftSchedule {
            period_chunks: args.period,
            chunk_size: args.chunk_size,
            n_chunks: args.chunks,
        },
        drifting: !args.stationary,
    };
    let stream = spec.build(args.seed);
    let n_features = stream.n_features();
    match &args.out {
        Some(path) => {
            let mut w =
                BufWriter::new(File::create(path).map_err(|e| format!("{}: {e}", path.display()))?);
            export_csv(stream, n_features, &mut w).map_err(|e| format!("{e}"))?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            export_csv(stream, n_features, &mut w).map_err(|e| format!("{e}"))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Synthesizes a PU-sample stream for benchmarking: a stationary mix of
/// confident-correct and uncertain-wrong predictions, with an optional
/// periodic distribution shift.
fn bench_stream(n: usize, chunk_size: usize, drift_every: Option<usize>, seed: u64) -> Vec<PuSample> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let phase = drift_every
                .map(|d| (i / (d * chunk_size)) % 2 == 1)
                .unwrap_or(false);
            let shift = if phase { 0.3 } else { 0.0 };
            let correct = rng.gen::<f64>() >= 0.1;
            let pu = if correct {
                (rng.gen::<f64>() * 0.4 + shift).clamp(0.0, 1.0)
            } else {
                (0.6 + rng.gen::<f64>() * 0.4 - shift).clamp(0.0, 1.0)
            };
            PuSample::new(pu, correct)
        })
        .collect()
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode, String> {
    let mut config = pudd::detector::DetectorConfig::with_sigma(args.sigma);
    config.bucketing = BucketingConfig::with_k(args.k);
    let stream = bench_stream(args.n, args.chunk_size, args.drift_every, args.seed);
    let report = bench_incremental_vs_batch(&stream, &config, args.chunk_size);
    println!(
        "incremental: {:>10.1} ms  ({} alarms)",
        report.incremental_ms,
        report.incremental_alarms.len()
    );
    println!(
        "batch:       {:>10.1} ms  ({} alarms)",
        report.batch_ms,
        report.batch_alarms.len()
    );
    println!("speedup:     {:>10.1}x", report.speedup());
    if !report.alarms_equal {
        eprintln!(
            "alarm sequences differ: {:?} vs {:?}",
            report.incremental_alarms, report.batch_alarms
        );
        return Ok(ExitCode::from(EXIT_ASSERTION));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_proptest(args: &ProptestArgs) -> Result<ExitCode, String> {
    print!("equal-proportion identity ({} pairs): ", args.pairs);
    match equal_proportion_suite(args.pairs, args.seed) {
        Ok(()) => println!("ok"),
        Err(e) => {
            println!("FAILED: {e}");
            return Ok(ExitCode::from(EXIT_ASSERTION));
        }
    }
    print!(
        "equal-error counterexample ({} runs x {}): ",
        args.runs, args.window
    );
    match equal_error_witness_suite(args.runs, args.window, args.sigma, args.seed) {
        Ok(summary) => {
            println!(
                "{}/{} witnessed (max p = {:.3e})",
                summary.witness_holds, summary.runs, summary.max_p_value
            );
            if summary.witness_holds * 100 < summary.runs * 95 {
                return Ok(ExitCode::from(EXIT_ASSERTION));
            }
        }
        Err(e) => {
            println!("FAILED: {e}");
            return Ok(ExitCode::from(EXIT_ASSERTION));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Proptest(args) => cmd_proptest(args),
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
