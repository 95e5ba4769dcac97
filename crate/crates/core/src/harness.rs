//! Prequential (test-then-train) evaluation of drift detectors.
//!
//! Each chunk is scored before any model update sees it. The resulting
//! PU samples (or error indicators, for the baselines) feed the
//! configured detector; an alarm triggers the adaptation policy
//! (retraining the classifier on the current chunk and discarding
//! antiquated detector state). Repetitions run in parallel with distinct
//! seeds and are aggregated in seed order.

use crate::baselines::{DdmState, DetectorStatus, PageHinkleyState};
use crate::bucketing::BucketingConfig;
use crate::classifiers::{self, ClassifierError, GnbModel};
use crate::detector::{self, Chunk, DetectorConfig, PuSample, SkipHeuristic, SubStream};
use crate::incremental::OnlineDetector;
use crate::streams::{
    gen_equal_error_counterexample, gen_equal_proportion_windows, ChunkStream, DriftSchedule,
    MixedConcept, MixedStream, SeaStream, SineConcept, SineStream, SEA_DEFAULT_THETAS,
};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("configurations disagree: {0}")]
    Mismatch(String),
    #[error("classifier failure during evaluation: {0}")]
    Classifier(#[from] ClassifierError),
}

/// Which synthetic stream to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Sea0,
    Sea10,
    Sea20,
    Sine,
    Mixed,
}

impl FromStr for StreamKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sea0" => Ok(Self::Sea0),
            "sea10" => Ok(Self::Sea10),
            "sea20" => Ok(Self::Sea20),
            "sine" => Ok(Self::Sine),
            "mixed" => Ok(Self::Mixed),
            other => Err(ConfigError::Invalid(format!("unknown stream '{other}'"))),
        }
    }
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Sea0 => "sea0",
            Self::Sea10 => "sea10",
            Self::Sea20 => "sea20",
            Self::Sine => "sine",
            Self::Mixed => "mixed",
        };
        f.write_str(name)
    }
}

/// Stream generator plus seeding and drift schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub kind: StreamKind,
    pub seed: u64,
    pub schedule: DriftSchedule,
    /// When false, the concept never changes (stationary stream).
    pub drifting: bool,
}

impl StreamSpec {
    pub fn new(kind: StreamKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            schedule: DriftSchedule::default(),
            drifting: true,
        }
    }

    pub fn build(&self, seed: u64) -> Box<dyn ChunkStream> {
        let schedule = self.schedule.clone();
        match self.kind {
            StreamKind::Sea0 | StreamKind::Sea10 | StreamKind::Sea20 => {
                let noise = match self.kind {
                    StreamKind::Sea10 => 10,
                    StreamKind::Sea20 => 20,
                    _ => 0,
                };
                let thetas = if self.drifting {
                    SEA_DEFAULT_THETAS.to_vec()
                } else {
                    vec![SEA_DEFAULT_THETAS[0]]
                };
                Box::new(SeaStream::new(seed, schedule, thetas, noise))
            }
            StreamKind::Sine => {
                let concepts = if self.drifting {
                    SineStream::alternating()
                } else {
                    vec![SineConcept::Normal]
                };
                Box::new(SineStream::new(seed, schedule, concepts))
            }
            StreamKind::Mixed => {
                let concepts = if self.drifting {
                    MixedStream::alternating()
                } else {
                    vec![MixedConcept::Normal]
                };
                Box::new(MixedStream::new(seed, schedule, concepts))
            }
        }
    }
}

/// Which detector drives adaptation.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorSpec {
    PuddBatch(DetectorConfig),
    PuddIncremental(DetectorConfig),
    Ddm,
    PageHinkley,
    None,
}

impl DetectorSpec {
    pub fn name(&self) -> String {
        match self {
            Self::PuddBatch(cfg) => format!("pudd-batch(sigma={:e})", cfg.sigma),
            Self::PuddIncremental(cfg) => format!("pudd-incremental(sigma={:e})", cfg.sigma),
            Self::Ddm => "ddm".to_string(),
            Self::PageHinkley => "page-hinkley".to_string(),
            Self::None => "none".to_string(),
        }
    }

    /// Parses CLI-style names: `pudd-batch`, `pudd-incremental`, `ddm`,
    /// `ph`, `none`.
    pub fn parse(name: &str, sigma: f64, bucketing: BucketingConfig) -> Result<Self, ConfigError> {
        let pudd = DetectorConfig {
            sigma,
            bucketing,
            skip_heuristic: SkipHeuristic::default(),
        };
        match name {
            "pudd" | "pudd-batch" => Ok(Self::PuddBatch(pudd)),
            "pudd-incremental" | "pudd-online" => Ok(Self::PuddIncremental(pudd)),
            "ddm" => Ok(Self::Ddm),
            "ph" | "page-hinkley" => Ok(Self::PageHinkley),
            "none" => Ok(Self::None),
            other => Err(ConfigError::Invalid(format!("unknown detector '{other}'"))),
        }
    }
}

/// When the probe classifier trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingRegime {
    /// Test-then-train: every chunk is learned after being scored.
    Incremental,
    /// Train at initialization and on alarms only.
    TrainOnceUntilAlarm,
}

impl FromStr for TrainingRegime {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "incremental" => Ok(Self::Incremental),
            "train_once" | "train-once" | "train_once_until_alarm" => {
                Ok(Self::TrainOnceUntilAlarm)
            }
            other => Err(ConfigError::Invalid(format!("unknown regime '{other}'"))),
        }
    }
}

/// One full experiment: stream, detector, training regime, repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub stream: StreamSpec,
    pub detector: DetectorSpec,
    pub regime: TrainingRegime,
    pub repetitions: usize,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.repetitions < 1 {
            return Err(ConfigError::Invalid("repetitions must be >= 1".into()));
        }
        if self.stream.schedule.n_chunks < 2 {
            return Err(ConfigError::Invalid("need at least two chunks".into()));
        }
        Ok(())
    }
}

/// Per-chunk evaluation record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChunkRecord {
    pub chunk: usize,
    pub accuracy: f64,
    pub alarm: bool,
}

/// Wall-clock per phase, in milliseconds.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PhaseTimings {
    pub predict_ms: f64,
    pub detect_ms: f64,
    pub train_ms: f64,
}

impl PhaseTimings {
    pub fn total_ms(&self) -> f64 {
        self.predict_ms + self.detect_ms + self.train_ms
    }
}

/// Metrics of one prequential run.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub chunks: Vec<ChunkRecord>,
    pub overall_accuracy: f64,
    pub alarm_chunks: Vec<usize>,
    /// Detection delay in chunks per injected drift; `None` = undetected.
    pub delays: Vec<Option<usize>>,
    pub false_alarms: usize,
    pub wall: PhaseTimings,
}

impl RunMetrics {
    /// CSV rows `chunk,accuracy,alarm`, exactly as specified for run
    /// output files.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "chunk,accuracy,alarm")?;
        for rec in &self.chunks {
            writeln!(
                out,
                "{},{},{}",
                rec.chunk,
                rec.accuracy,
                u8::from(rec.alarm)
            )?;
        }
        Ok(())
    }

    /// The JSON summary object for this run.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "overall_accuracy": self.overall_accuracy,
            "alarms": self.alarm_chunks,
            "delays": self.delays,
            "false_alarms": self.false_alarms,
            "wall_ms": self.wall.total_ms(),
        })
    }
}

/// Aggregate over all repetitions of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub runs: Vec<RunMetrics>,
    pub mean_accuracy: f64,
    /// Mean delay over detected drifts, when any drift was detected.
    pub mean_delay: Option<f64>,
    pub detected_drifts: usize,
    pub total_drifts: usize,
    pub false_alarms: usize,
}

impl ExperimentResult {
    pub fn recall(&self) -> f64 {
        if self.total_drifts == 0 {
            1.0
        } else {
            self.detected_drifts as f64 / self.total_drifts as f64
        }
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mean_overall_accuracy": self.mean_accuracy,
            "mean_delay": self.mean_delay,
            "detected_drifts": self.detected_drifts,
            "total_drifts": self.total_drifts,
            "false_alarms": self.false_alarms,
            "runs": self.runs.iter().map(|r| r.summary_json()).collect::<Vec<_>>(),
        })
    }
}

enum ActiveDetector {
    PuddBatch { sub: SubStream, config: DetectorConfig },
    PuddIncremental { online: OnlineDetector },
    Ddm(DdmState),
    PageHinkley(PageHinkleyState),
    None,
}

impl ActiveDetector {
    fn build(spec: &DetectorSpec, chunk_size: usize) -> Self {
        match spec {
            DetectorSpec::PuddBatch(config) => Self::PuddBatch {
                sub: SubStream::new(),
                config: config.clone(),
            },
            DetectorSpec::PuddIncremental(config) => Self::PuddIncremental {
                online: OnlineDetector::new(config.clone(), chunk_size),
            },
            DetectorSpec::Ddm => Self::Ddm(DdmState::new()),
            DetectorSpec::PageHinkley => Self::PageHinkley(PageHinkleyState::new()),
            DetectorSpec::None => Self::None,
        }
    }

    /// Feeds one scored chunk; returns whether an alarm fired.
    ///
    /// On alarm the whole PU history is dropped, not just the chunks up
    /// to the chosen cut: the alarm triggers classifier retraining, and
    /// PU values computed by the old model are antiquated wholesale.
    /// Keeping them mixes two models' uncertainty distributions and
    /// echoes false alarms after every adaptation.
    fn feed(&mut self, chunk_index: u64, samples: Vec<PuSample>) -> bool {
        match self {
            Self::PuddBatch { sub, config } => {
                sub.push(Chunk::new(chunk_index, samples));
                let report = detector::detect(sub, config);
                if report.alarm {
                    *sub = SubStream::new();
                    true
                } else {
                    false
                }
            }
            Self::PuddIncremental { online } => {
                let mut alarm = false;
                for s in samples {
                    let report = online.observe(s);
                    if report.alarm {
                        online.reset();
                        alarm = true;
                    }
                }
                alarm
            }
            Self::Ddm(state) => {
                let mut alarm = false;
                for s in &samples {
                    if state.update(!s.correct) == DetectorStatus::Drift {
                        alarm = true;
                    }
                }
                if alarm {
                    state.reset();
                }
                alarm
            }
            Self::PageHinkley(state) => {
                let mut alarm = false;
                for s in &samples {
                    if state.update(!s.correct) == DetectorStatus::Drift {
                        alarm = true;
                    }
                }
                if alarm {
                    state.reset();
                }
                alarm
            }
            Self::None => false,
        }
    }
}

/// Matches alarms to injected drifts: the first alarm at or after a drift
/// (and before the next one) detects it; every other alarm is false.
pub fn attribute_alarms(
    alarms: &[usize],
    drifts: &[usize],
    n_chunks: usize,
) -> (Vec<Option<usize>>, usize) {
    let mut delays = Vec::with_capacity(drifts.len());
    let mut matched = vec![false; alarms.len()];
    for (i, &drift) in drifts.iter().enumerate() {
        let window_end = drifts.get(i + 1).copied().unwrap_or(n_chunks);
        let hit = alarms
            .iter()
            .enumerate()
            .find(|&(j, &a)| !matched[j] && a >= drift && a < window_end);
        match hit {
            Some((j, &a)) => {
                matched[j] = true;
                delays.push(Some(a - drift));
            }
            None => delays.push(None),
        }
    }
    let false_alarms = matched.iter().filter(|&&m| !m).count();
    (delays, false_alarms)
}

fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunMetrics, ConfigError> {
    let mut stream = config.stream.build(seed);
    let drift_chunks = stream.drift_chunks();
    let n_chunks = config.stream.schedule.n_chunks;
    let chunk_size = config.stream.schedule.chunk_size;

    let mut model = GnbModel::new(stream.n_classes(), stream.n_features());
    let mut detector = ActiveDetector::build(&config.detector, chunk_size);
    let mut wall = PhaseTimings::default();

    // Chunk 0 initializes the classifier; scoring starts at chunk 1.
    let first = stream
        .next()
        .ok_or_else(|| ConfigError::Invalid("stream produced no chunks".into()))?;
    let t0 = Instant::now();
    for inst in &first {
        model.partial_fit(&inst.x, inst.y)?;
    }
    wall.train_ms += t0.elapsed().as_secs_f64() * 1e3;
    if !model.is_trained() {
        return Err(ConfigError::Invalid(
            "first chunk does not cover every class".into(),
        ));
    }

    let mut records = Vec::with_capacity(n_chunks.saturating_sub(1));
    let mut alarm_chunks = Vec::new();
    let mut correct_total = 0usize;
    let mut scored_total = 0usize;

    for (offset, chunk) in stream.enumerate() {
        let chunk_index = offset + 1;

        let t0 = Instant::now();
        let mut pu_samples = Vec::with_capacity(chunk.len());
        let mut correct_count = 0usize;
        for inst in &chunk {
            let proba = model.predict_proba(&inst.x)?;
            let err = classifiers::error_indicator(&proba, inst.y)? == 1;
            let pu = classifiers::pu_index(&proba, inst.y)?;
            if !err {
                correct_count += 1;
            }
            pu_samples.push(PuSample::new(pu, !err));
        }
        wall.predict_ms += t0.elapsed().as_secs_f64() * 1e3;
        let accuracy = correct_count as f64 / chunk.len() as f64;
        correct_total += correct_count;
        scored_total += chunk.len();

        let t0 = Instant::now();
        let alarm = detector.feed(chunk_index as u64, pu_samples);
        wall.detect_ms += t0.elapsed().as_secs_f64() * 1e3;
        if alarm {
            alarm_chunks.push(chunk_index);
        }

        let t0 = Instant::now();
        if alarm {
            // Adaptation policy: refit the classifier on the current
            // chunk, provided the chunk covers every class.
            let classes_present = (0..model.n_classes())
                .all(|c| chunk.iter().any(|inst| inst.y == c));
            if classes_present {
                model.reset();
                for inst in &chunk {
                    model.partial_fit(&inst.x, inst.y)?;
                }
            }
        } else if config.regime == TrainingRegime::Incremental {
            for inst in &chunk {
                model.partial_fit(&inst.x, inst.y)?;
            }
        }
        wall.train_ms += t0.elapsed().as_secs_f64() * 1e3;

        records.push(ChunkRecord {
            chunk: chunk_index,
            accuracy,
            alarm,
        });
    }

    let overall_accuracy = correct_total as f64 / scored_total.max(1) as f64;
    let (delays, false_alarms) = attribute_alarms(&alarm_chunks, &drift_chunks, n_chunks);
    Ok(RunMetrics {
        seed,
        chunks: records,
        overall_accuracy,
        alarm_chunks,
        delays,
        false_alarms,
        wall,
    })
}

/// Runs an experiment: `repetitions` prequential passes with distinct
/// seeds, in parallel, aggregated in seed order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ConfigError> {
    config.validate()?;
    let mut runs = (0..config.repetitions as u64)
        .into_par_iter()
        .map(|rep| run_single(config, config.stream.seed.wrapping_add(rep)))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by_key(|r| r.seed);

    let mean_accuracy =
        runs.iter().map(|r| r.overall_accuracy).sum::<f64>() / runs.len() as f64;
    let mut detected = 0usize;
    let mut total = 0usize;
    let mut delay_sum = 0usize;
    let mut false_alarms = 0usize;
    for run in &runs {
        total += run.delays.len();
        for d in run.delays.iter().flatten() {
            detected += 1;
            delay_sum += d;
        }
        false_alarms += run.false_alarms;
    }
    Ok(ExperimentResult {
        runs,
        mean_accuracy,
        mean_delay: (detected > 0).then(|| delay_sum as f64 / detected as f64),
        detected_drifts: detected,
        total_drifts: total,
        false_alarms,
    })
}

/// One row of a detector comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub detector: String,
    pub mean_accuracy: f64,
    pub mean_delay: Option<f64>,
    pub detected_drifts: usize,
    pub total_drifts: usize,
    pub false_alarms: usize,
}

/// Detector comparison over a shared stream and regime.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(
            out,
            "detector,mean_accuracy,mean_delay,detected_drifts,total_drifts,false_alarms"
        )?;
        for r in &self.rows {
            let delay = r
                .mean_delay
                .map(|d| d.to_string())
                .unwrap_or_else(|| "undetected".to_string());
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.detector, r.mean_accuracy, delay, r.detected_drifts, r.total_drifts, r.false_alarms
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.detector.len())
            .max()
            .unwrap_or(8)
            .max(8);
        writeln!(
            f,
            "{:<name_width$}  {:>9}  {:>10}  {:>9}  {:>12}",
            "detector", "accuracy", "delay", "detected", "false_alarms"
        )?;
        for r in &self.rows {
            let delay = r
                .mean_delay
                .map(|d| format!("{d:.2}"))
                .unwrap_or_else(|| "-".to_string());
            writeln!(
                f,
                "{:<name_width$}  {:>9.4}  {:>10}  {:>6}/{:<2}  {:>12}",
                r.detector, r.mean_accuracy, delay, r.detected_drifts, r.total_drifts, r.false_alarms
            )?;
        }
        Ok(())
    }
}

/// Runs several detector arms over the same stream and regime.
///
/// All configs must share the stream spec and training regime; rows come
/// back in input order.
pub fn compare_detectors(configs: &[ExperimentConfig]) -> Result<ComparisonTable, ConfigError> {
    let Some(first) = configs.first() else {
        return Err(ConfigError::Invalid("no configurations given".into()));
    };
    for c in configs {
        if c.stream != first.stream {
            return Err(ConfigError::Mismatch("stream specs differ".into()));
        }
        if c.regime != first.regime {
            return Err(ConfigError::Mismatch("training regimes differ".into()));
        }
    }
    let mut rows = Vec::with_capacity(configs.len());
    for config in configs {
        let result = run_experiment(config)?;
        rows.push(ComparisonRow {
            detector: config.detector.name(),
            mean_accuracy: result.mean_accuracy,
            mean_delay: result.mean_delay,
            detected_drifts: result.detected_drifts,
            total_drifts: result.total_drifts,
            false_alarms: result.false_alarms,
        });
    }
    Ok(ComparisonTable { rows })
}

/// Histogram-proportion identity suite: generated window pairs with
/// identical correctness-histogram proportions must have exactly equal error
/// rates (integer cross-products) and standard deviations matching
/// `sqrt(e - e^2)` to 1e-12.
pub fn equal_proportion_suite(pairs: usize, seed: u64) -> Result<(), String> {
    for i in 0..pairs as u64 {
        let (w1, w2, edges) = gen_equal_proportion_windows(seed.wrapping_add(i));
        let mis = |w: &[PuSample]| w.iter().filter(|s| !s.correct).count() as u128;
        let (n1, n2) = (w1.len() as u128, w2.len() as u128);
        if mis(&w1) * n2 != mis(&w2) * n1 {
            return Err(format!("pair {i}: error rates differ"));
        }
        for (name, w) in [("w1", &w1), ("w2", &w2)] {
            let n = w.len() as f64;
            let rate = mis(w) as f64 / n;
            let direct = (w
                .iter()
                .map(|s| {
                    let e = if s.correct { 0.0 } else { 1.0 };
                    (e - rate) * (e - rate)
                })
                .sum::<f64>()
                / n)
                .sqrt();
            if (direct - (rate - rate * rate).sqrt()).abs() > 1e-12 {
                return Err(format!("pair {i}: {name} std identity off"));
            }
        }
        if !detector::equal_proportions_imply_equal_error_stats(&w1, &w2, &edges) {
            return Err(format!("pair {i}: proportion identity check failed"));
        }
    }
    Ok(())
}

/// Outcome of the equal-error counterexample suite.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessSummary {
    pub runs: usize,
    /// Runs where the PU-index test alarmed while DDM and PH stayed
    /// stable across the shift.
    pub witness_holds: usize,
    pub max_p_value: f64,
}

/// Equal-error counterexample suite: both windows have error rate and
/// std exactly 0.5, the PU-index Chi-square p-value is below `sigma`,
/// and the error-rate baselines stay silent across the shift.
pub fn equal_error_witness_suite(
    runs: usize,
    n_per_window: usize,
    sigma: f64,
    seed: u64,
) -> Result<WitnessSummary, String> {
    let mut witness_holds = 0;
    let mut max_p: f64 = 0.0;
    for i in 0..runs as u64 {
        let (w1, w2) = gen_equal_error_counterexample(seed.wrapping_add(i), n_per_window);
        for (name, w) in [("w1", &w1), ("w2", &w2)] {
            let mis = w.iter().filter(|s| !s.correct).count();
            if 2 * mis != w.len() {
                return Err(format!("run {i}: {name} error rate not exactly 0.5"));
            }
            let rate = mis as f64 / w.len() as f64;
            let std = (w
                .iter()
                .map(|s| {
                    let e = if s.correct { 0.0 } else { 1.0 };
                    (e - rate) * (e - rate)
                })
                .sum::<f64>()
                / w.len() as f64)
                .sqrt();
            if std != 0.5 {
                return Err(format!("run {i}: {name} error std {std} != 0.5"));
            }
        }
        let pu = |w: &[PuSample], correct: bool| -> Vec<f64> {
            w.iter()
                .filter(|s| s.correct == correct)
                .map(|s| s.pu)
                .collect()
        };
        let (table, _) = detector::build_table(
            &pu(&w1, true),
            &pu(&w2, true),
            &pu(&w1, false),
            &pu(&w2, false),
            &BucketingConfig::default(),
        )
        .map_err(|e| format!("run {i}: {e}"))?;
        let p = crate::chi2::chi_square_test(&table)
            .map_err(|e| format!("run {i}: {e}"))?
            .p_value;
        max_p = max_p.max(p);

        // "Stable across the shift": the baselines must not signal drift
        // from the shift point onward. Early warm-up fluctuations before
        // the shift are not evidence of seeing it.
        let mut ddm = DdmState::new();
        let mut ph = PageHinkleyState::new();
        for s in &w1 {
            ddm.update(!s.correct);
            ph.update(!s.correct);
        }
        let mut baselines_stable = true;
        for s in &w2 {
            if ddm.update(!s.correct) == DetectorStatus::Drift
                || ph.update(!s.correct) == DetectorStatus::Drift
            {
                baselines_stable = false;
            }
        }
        if p < sigma && baselines_stable {
            witness_holds += 1;
        }
    }
    Ok(WitnessSummary {
        runs,
        witness_holds,
        max_p_value: max_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(detector: DetectorSpec) -> ExperimentConfig {
        ExperimentConfig {
            stream: StreamSpec {
                kind: StreamKind::Sea0,
                seed: 11,
                schedule: DriftSchedule {
                    period_chunks: 5,
                    chunk_size: 200,
                    n_chunks: 12,
                },
                drifting: true,
            },
            detector,
            regime: TrainingRegime::Incremental,
            repetitions: 2,
        }
    }

    #[test]
    fn no_detector_baseline_accuracy() {
        let config = ExperimentConfig {
            stream: StreamSpec {
                kind: StreamKind::Sea0,
                seed: 1,
                schedule: DriftSchedule {
                    period_chunks: 10,
                    chunk_size: 500,
                    n_chunks: 20,
                },
                drifting: false,
            },
            detector: DetectorSpec::None,
            regime: TrainingRegime::Incremental,
            repetitions: 1,
        };
        let result = run_experiment(&config).unwrap();
        assert!(
            result.mean_accuracy >= 0.93,
            "stationary accuracy = {}",
            result.mean_accuracy
        );
        assert!(result.runs[0].alarm_chunks.is_empty());
    }

    #[test]
    fn test_then_train_ordering() {
        // With train-once, accuracy on a stationary stream must come from
        // the initial fit alone; alarms never fire with detector none, so
        // per-chunk accuracies stay near the chunk-0 model quality.
        let config = ExperimentConfig {
            stream: StreamSpec {
                kind: StreamKind::Sine,
                seed: 3,
                schedule: DriftSchedule {
                    period_chunks: 10,
                    chunk_size: 300,
                    n_chunks: 6,
                },
                drifting: false,
            },
            detector: DetectorSpec::None,
            regime: TrainingRegime::TrainOnceUntilAlarm,
            repetitions: 1,
        };
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.runs[0].chunks.len(), 5);
    }

    #[test]
    fn pudd_detects_sea_drifts() {
        let config = tiny_config(DetectorSpec::PuddBatch(DetectorConfig::with_sigma(1e-3)));
        let result = run_experiment(&config).unwrap();
        assert!(
            result.detected_drifts > 0,
            "expected some detections: {result:?}"
        );
    }

    #[test]
    fn alarm_attribution() {
        // drifts at 10 and 20 in a 30-chunk run
        let (delays, false_alarms) = attribute_alarms(&[3, 11, 12, 25], &[10, 20], 30);
        assert_eq!(delays, vec![Some(1), Some(5)]);
        assert_eq!(false_alarms, 2); // chunks 3 and 12
        let (delays, false_alarms) = attribute_alarms(&[], &[10], 30);
        assert_eq!(delays, vec![None]);
        assert_eq!(false_alarms, 0);
    }

    #[test]
    fn csv_output_is_reproducible() {
        // Byte-identical CSV for a fixed config and seed set. The JSON
        // summary is excluded: it carries wall-clock timings.
        let config = tiny_config(DetectorSpec::Ddm);
        let render = || {
            let result = run_experiment(&config).unwrap();
            let mut bytes = Vec::new();
            for run in &result.runs {
                run.write_csv(&mut bytes).unwrap();
            }
            bytes
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn csv_header_and_rows() {
        let config = tiny_config(DetectorSpec::None);
        let result = run_experiment(&config).unwrap();
        let mut bytes = Vec::new();
        result.runs[0].write_csv(&mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("chunk,accuracy,alarm"));
        assert_eq!(lines.count(), 11); // chunks 1..=11
    }

    #[test]
    fn compare_rejects_mismatched_streams() {
        let a = tiny_config(DetectorSpec::Ddm);
        let mut b = tiny_config(DetectorSpec::PageHinkley);
        b.stream.seed = 999;
        assert!(matches!(
            compare_detectors(&[a, b]),
            Err(ConfigError::Mismatch(_))
        ));
    }

    #[test]
    fn compare_rows_in_input_order() {
        let configs = vec![
            tiny_config(DetectorSpec::Ddm),
            tiny_config(DetectorSpec::PageHinkley),
        ];
        let table = compare_detectors(&configs).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].detector, "ddm");
        assert_eq!(table.rows[1].detector, "page-hinkley");
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("detector,"));
    }

    #[test]
    fn property_suites_pass_at_desk_scale() {
        equal_proportion_suite(50, 7).unwrap();
        let summary = equal_error_witness_suite(10, 1000, 1e-5, 7).unwrap();
        assert_eq!(summary.witness_holds, 10, "{summary:?}");
        assert!(summary.max_p_value < 1e-5);
    }

    #[test]
    fn stream_kind_parsing() {
        assert_eq!("sea0".parse::<StreamKind>().unwrap(), StreamKind::Sea0);
        assert!("bogus".parse::<StreamKind>().is_err());
        assert_eq!(
            "train_once".parse::<TrainingRegime>().unwrap(),
            TrainingRegime::TrainOnceUntilAlarm
        );
    }
}
