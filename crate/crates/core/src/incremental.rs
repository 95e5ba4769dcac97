//! Online instance-based PU-index drift detection.
//!
//! Instead of rebuilding every window pair per chunk, the detector keeps
//! one cached state per live cut point: a bucket spec frozen when the cut
//! was created (its first window never changes while the cut is live), the
//! live contingency table, and running misclassified-PU sums for the skip
//! heuristic. A new sample then costs a single table increment per cut,
//! and only the newest cut needs a fresh fit.
//!
//! Cuts are created at chunk boundaries by default, which makes the alarm
//! sequence identical to the batch detector run once per chunk on the
//! same data. Constructing the detector with `chunk_size = 1` gives the
//! per-instance variant where every observation opens a new cut and the
//! alarm rule runs on every sample.

use crate::bucketing::{self, BucketSpec};
use crate::chi2::{self, ContingencyTable};
use crate::detector::{
    assemble_report, detect, on_alarm, Chunk, CutEval, CutOutcome, DetectionReport,
    DetectorConfig, PuSample, SubStream,
};
use std::time::Instant;

/// Cached state for one live cut point.
#[derive(Debug, Clone)]
pub struct CutState {
    cut: u64,
    /// Frozen at creation; `None` when the first window had no correctly
    /// classified samples (the cut stays degenerate for its lifetime).
    spec: Option<BucketSpec>,
    row1: Vec<u64>,
    row2: Vec<u64>,
    /// Misclassified counts per window.
    mis: [u64; 2],
    /// Running sums of misclassified PU values per window.
    mis_sum: [f64; 2],
}

impl CutState {
    /// Builds the state from scratch: fits the spec on the first window's
    /// correct PU values, freezes row 1, and replays the second window.
    fn create(
        cut: u64,
        history: &[Chunk],
        current: &[PuSample],
        config: &DetectorConfig,
    ) -> Self {
        let mut correct1 = Vec::new();
        let mut mis = [0u64; 2];
        let mut mis_sum = [0.0f64; 2];
        for chunk in history.iter().filter(|c| c.index <= cut) {
            for s in &chunk.samples {
                if s.correct {
                    correct1.push(s.pu);
                } else {
                    mis[0] += 1;
                    mis_sum[0] += s.pu;
                }
            }
        }
        let spec = (!correct1.is_empty()).then(|| bucketing::fit(&correct1, &config.bucketing));
        let row1 = spec
            .as_ref()
            .map(|s| s.histogram(&correct1).expect("values validated"))
            .unwrap_or_default();
        let row2 = vec![0u64; row1.len()];
        let mut state = Self {
            cut,
            spec,
            row1,
            row2,
            mis,
            mis_sum,
        };
        for chunk in history.iter().filter(|c| c.index > cut) {
            for s in &chunk.samples {
                state.push_second(s);
            }
        }
        for s in current {
            state.push_second(s);
        }
        state
    }

    /// The delta-T update: exactly one cell of the second-window row
    /// changes per incoming sample.
    fn push_second(&mut self, s: &PuSample) {
        if s.correct {
            if let Some(spec) = &self.spec {
                self.row2[spec.assign(s.pu).expect("PU in range")] += 1;
            }
        } else {
            self.mis[1] += 1;
            self.mis_sum[1] += s.pu;
        }
    }

    pub fn cut(&self) -> u64 {
        self.cut
    }

    pub fn spec(&self) -> Option<&BucketSpec> {
        self.spec.as_ref()
    }

    /// The table the Chi-square test would see right now: bucket columns
    /// plus the misclassified column when either window has errors.
    /// `None` when the cut is degenerate (no spec, or a single column).
    pub fn effective_table(&self) -> Option<ContingencyTable> {
        self.spec.as_ref()?;
        let mut row1 = self.row1.clone();
        let mut row2 = self.row2.clone();
        if self.mis[0] + self.mis[1] > 0 {
            row1.push(self.mis[0]);
            row2.push(self.mis[1]);
        }
        ContingencyTable::new(row1, row2).ok()
    }

    fn mis_mean(&self, window: usize) -> f64 {
        if self.mis[window] == 0 {
            0.0
        } else {
            self.mis_sum[window] / self.mis[window] as f64
        }
    }

    fn evaluate(&self, config: &DetectorConfig) -> CutOutcome {
        if !config
            .skip_heuristic
            .should_test(self.mis_mean(0), self.mis_mean(1))
        {
            return CutOutcome::SkippedHeuristic;
        }
        let Some(table) = self.effective_table() else {
            return CutOutcome::Degenerate;
        };
        match chi2::chi_square_test(&table) {
            Ok(result) => CutOutcome::Tested {
                p_value: result.p_value,
            },
            Err(_) => CutOutcome::Degenerate,
        }
    }
}

/// Online drift detector with cached per-cut state.
#[derive(Debug, Clone)]
pub struct OnlineDetector {
    config: DetectorConfig,
    chunk_size: usize,
    max_live_cuts: Option<usize>,
    /// Completed chunks since the last alarm.
    history: Vec<Chunk>,
    /// Samples of the chunk currently being filled.
    current: Vec<PuSample>,
    next_index: u64,
    cuts: Vec<CutState>,
}

impl OnlineDetector {
    /// Chunk-aligned detector: cuts are created and the alarm rule runs
    /// whenever `chunk_size` samples complete a chunk.
    pub fn new(config: DetectorConfig, chunk_size: usize) -> Self {
        assert!(chunk_size >= 1);
        Self {
            config,
            chunk_size,
            max_live_cuts: None,
            history: Vec::new(),
            current: Vec::new(),
            next_index: 0,
            cuts: Vec::new(),
        }
    }

    /// Per-instance variant: every sample completes its own chunk, so a
    /// cut is created and the alarm rule runs on every observation.
    pub fn per_instance(config: DetectorConfig) -> Self {
        Self::new(config, 1)
    }

    /// Caps the number of live cuts; the oldest are dropped beyond the
    /// cap. Off by default (and in all equivalence tests).
    pub fn with_max_live_cuts(mut self, cap: usize) -> Self {
        self.max_live_cuts = Some(cap.max(1));
        self
    }

    /// First chunk index of the current substream.
    pub fn t1(&self) -> Option<u64> {
        self.history.first().map(|c| c.index)
    }

    /// Live cut states, oldest first.
    pub fn cuts(&self) -> &[CutState] {
        &self.cuts
    }

    /// The substream of completed chunks (for batch cross-checks).
    pub fn substream(&self) -> SubStream {
        SubStream::from_chunks(self.history.clone())
    }

    /// Absorbs one sample.
    ///
    /// Every pre-existing cut receives its single-increment update. If the
    /// sample completes a chunk, the alarm rule runs over all cuts whose
    /// second window is non-empty and a new cut is opened for the
    /// completed chunk; otherwise an empty no-alarm report is returned.
    pub fn observe(&mut self, sample: PuSample) -> DetectionReport {
        for cut in &mut self.cuts {
            cut.push_second(&sample);
        }
        self.current.push(sample);
        if self.current.len() < self.chunk_size {
            return DetectionReport::default();
        }

        let completed = self.next_index;
        self.next_index += 1;
        self.history
            .push(Chunk::new(completed, std::mem::take(&mut self.current)));

        let per_cut: Vec<CutEval> = self
            .cuts
            .iter()
            .map(|c| CutEval {
                cut: c.cut,
                outcome: c.evaluate(&self.config),
            })
            .collect();
        let report = assemble_report(per_cut, self.config.sigma);

        self.cuts.push(CutState::create(
            completed,
            &self.history,
            &self.current,
            &self.config,
        ));
        if let Some(cap) = self.max_live_cuts {
            while self.cuts.len() > cap {
                self.cuts.remove(0);
            }
        }
        report
    }

    /// Advances past an alarm: antiquated chunks are discarded and the
    /// surviving cuts are rebuilt against the new substream start (their
    /// first windows changed, so specs and tables are refit).
    pub fn on_alarm_online(&mut self, chosen_cut: u64) {
        self.history.retain(|c| c.index > chosen_cut);
        self.cuts.clear();
        let indices: Vec<u64> = self.history.iter().map(|c| c.index).collect();
        for cut in indices {
            self.cuts.push(CutState::create(
                cut,
                &self.history,
                &self.current,
                &self.config,
            ));
        }
    }

    /// Drops the entire PU history while keeping the chunk numbering.
    /// Used when the probe classifier is retrained: PU values produced by
    /// the old model are antiquated wholesale.
    pub fn reset(&mut self) {
        self.history.clear();
        self.cuts.clear();
        self.current.clear();
    }
}

/// Timings and alarm agreement of the two detection modes on one stream.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub incremental_ms: f64,
    pub batch_ms: f64,
    /// (alarm chunk, chosen cut) pairs per mode.
    pub incremental_alarms: Vec<(u64, u64)>,
    pub batch_alarms: Vec<(u64, u64)>,
    pub alarms_equal: bool,
}

impl BenchReport {
    pub fn speedup(&self) -> f64 {
        self.batch_ms / self.incremental_ms.max(1e-9)
    }
}

/// Runs the incremental detector and the batch-recompute-per-chunk
/// detector over the same sample stream and compares wall time and alarm
/// sequences.
pub fn bench_incremental_vs_batch(
    stream: &[PuSample],
    config: &DetectorConfig,
    chunk_size: usize,
) -> BenchReport {
    assert!(chunk_size >= 1);

    let start = Instant::now();
    let mut online = OnlineDetector::new(config.clone(), chunk_size);
    let mut incremental_alarms = Vec::new();
    for (i, &s) in stream.iter().enumerate() {
        let report = online.observe(s);
        if report.alarm {
            let chunk_index = (i + 1) as u64 / chunk_size as u64 - 1;
            let cut = report.chosen_cut.expect("alarm implies chosen cut");
            incremental_alarms.push((chunk_index, cut));
            online.on_alarm_online(cut);
        }
    }
    let incremental_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let mut sub = SubStream::new();
    let mut batch_alarms = Vec::new();
    for (index, samples) in stream.chunks(chunk_size).enumerate() {
        if samples.len() < chunk_size {
            break; // trailing partial chunk, same as the online mode
        }
        sub.push(Chunk::new(index as u64, samples.to_vec()));
        let report = detect(&sub, config);
        if report.alarm {
            let cut = report.chosen_cut.expect("alarm implies chosen cut");
            batch_alarms.push((index as u64, cut));
            sub = on_alarm(&sub, cut);
        }
    }
    let batch_ms = start.elapsed().as_secs_f64() * 1e3;

    let alarms_equal = incremental_alarms == batch_alarms;
    BenchReport {
        incremental_ms,
        batch_ms,
        incremental_alarms,
        batch_alarms,
        alarms_equal,
    }
}
