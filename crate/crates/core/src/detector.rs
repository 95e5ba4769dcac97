//! Batch PU-index drift detector.
//!
//! The substream of chunks accumulated since the last alarm is split at
//! every candidate cut point into two windows. For each surviving cut the
//! correctly-classified PU values of the first window are bucketed, both
//! windows are counted into a `2 x (K + 1)` contingency table (last
//! column: misclassified counts), and a Chi-square p-value is computed
//! with `dof = K`. An alarm fires when the minimum p-value over all
//! tested cuts drops below the threshold, after which the chunks up to
//! the chosen cut are discarded as antiquated.

use crate::bucketing::{self, BucketSpec, BucketingConfig};
use crate::chi2::{self, ContingencyTable};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectorError {
    /// A cut would leave one of the two windows without samples.
    #[error("cut {cut} leaves an empty window")]
    EmptyWindow { cut: u64 },
    /// The first window has no correctly classified samples, so no bucket
    /// spec can be fitted.
    #[error("no correctly classified samples in the first window")]
    NoTrainingData,
    /// The table collapsed to a single column (one bucket and no
    /// misclassified instances), leaving nothing to compare.
    #[error("contingency table has a single column")]
    DegenerateTable,
}

/// One prediction event: the PU-index and whether the prediction was
/// correct.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuSample {
    pub pu: f64,
    pub correct: bool,
}

impl PuSample {
    pub fn new(pu: f64, correct: bool) -> Self {
        debug_assert!((0.0..=1.0).contains(&pu), "PU value {pu} outside [0,1]");
        Self { pu, correct }
    }
}

/// A block of consecutive PU samples with its stream position.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub index: u64,
    pub samples: Vec<PuSample>,
}

impl Chunk {
    pub fn new(index: u64, samples: Vec<PuSample>) -> Self {
        assert!(!samples.is_empty(), "chunks must be non-empty");
        Self { index, samples }
    }
}

/// The chunks gathered since the last alarm, ordered and contiguous.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubStream {
    chunks: Vec<Chunk>,
}

impl SubStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_chunks(chunks: Vec<Chunk>) -> Self {
        let mut sub = Self::new();
        for c in chunks {
            sub.push(c);
        }
        sub
    }

    /// Appends a chunk; its index must continue the sequence.
    pub fn push(&mut self, chunk: Chunk) {
        if let Some(last) = self.chunks.last() {
            assert_eq!(
                chunk.index,
                last.index + 1,
                "chunk indices must be contiguous"
            );
        }
        self.chunks.push(chunk);
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Index of the first chunk (`t1`).
    pub fn first_index(&self) -> Option<u64> {
        self.chunks.first().map(|c| c.index)
    }

    /// Index of the newest chunk (`t`).
    pub fn last_index(&self) -> Option<u64> {
        self.chunks.last().map(|c| c.index)
    }

    pub fn total_samples(&self) -> usize {
        self.chunks.iter().map(|c| c.samples.len()).sum()
    }
}

/// Which reading of the mean-comparison shortcut to apply before testing
/// a cut. The heuristic compares the misclassified PU means of the two
/// windows; the two paper readings disagree, so both are selectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SkipHeuristic {
    /// Test only when the newer window's misclassified PU mean is strictly
    /// larger (drift is expected to raise uncertainty).
    #[default]
    PaperText,
    /// Test only when the older window's misclassified PU mean is at least
    /// as large.
    PaperPseudocode,
    /// Test every cut.
    Off,
}

impl SkipHeuristic {
    /// Decides whether a cut is tested given the two misclassified means.
    pub fn should_test(self, mean_first: f64, mean_second: f64) -> bool {
        match self {
            SkipHeuristic::PaperText => mean_second > mean_first,
            SkipHeuristic::PaperPseudocode => mean_first >= mean_second,
            SkipHeuristic::Off => true,
        }
    }
}

/// Batch detector configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Alarm threshold on the minimum p-value.
    pub sigma: f64,
    pub bucketing: BucketingConfig,
    pub skip_heuristic: SkipHeuristic,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            sigma: 1e-5,
            bucketing: BucketingConfig::default(),
            skip_heuristic: SkipHeuristic::default(),
        }
    }
}

impl DetectorConfig {
    pub fn with_sigma(sigma: f64) -> Self {
        assert!(sigma > 0.0 && sigma < 1.0);
        Self {
            sigma,
            ..Self::default()
        }
    }
}

/// What happened at one cut point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutOutcome {
    /// A Chi-square test ran and produced this p-value.
    Tested { p_value: f64 },
    /// The mean-comparison heuristic skipped the cut.
    SkippedHeuristic,
    /// The cut's table was degenerate (no correct samples in the first
    /// window, or too few columns to test).
    Degenerate,
}

/// Per-cut record inside a [`DetectionReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutEval {
    pub cut: u64,
    pub outcome: CutOutcome,
}

/// Result of one detection pass over a substream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionReport {
    /// One entry per cut in `[t1, t - 1]`, in cut order.
    pub per_cut: Vec<CutEval>,
    /// Minimum p-value over tested cuts, if any cut was tested.
    pub min_p: Option<f64>,
    /// True iff `min_p < sigma`.
    pub alarm: bool,
    /// The argmin cut (first one on ties) when an alarm fires.
    pub chosen_cut: Option<u64>,
}

/// The four PU-value lists of a window pair, split by window membership
/// and correctness.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowSplit {
    pub correct_first: Vec<f64>,
    pub correct_second: Vec<f64>,
    pub mis_first: Vec<f64>,
    pub mis_second: Vec<f64>,
}

impl WindowSplit {
    pub fn total(&self) -> usize {
        self.correct_first.len()
            + self.correct_second.len()
            + self.mis_first.len()
            + self.mis_second.len()
    }
}

/// Mean of misclassified PU values; empty windows count as zero
/// uncertainty evidence.
pub(crate) fn mis_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Splits the substream at cut `r`: first window holds chunks with index
/// in `[t1, r]`, second window the rest.
pub fn split_at_cut(sub: &SubStream, cut: u64) -> Result<WindowSplit, DetectorError> {
    let (Some(t1), Some(t)) = (sub.first_index(), sub.last_index()) else {
        return Err(DetectorError::EmptyWindow { cut });
    };
    if cut < t1 || cut >= t {
        return Err(DetectorError::EmptyWindow { cut });
    }
    let mut split = WindowSplit::default();
    for chunk in sub.chunks() {
        let first = chunk.index <= cut;
        for s in &chunk.samples {
            match (first, s.correct) {
                (true, true) => split.correct_first.push(s.pu),
                (true, false) => split.mis_first.push(s.pu),
                (false, true) => split.correct_second.push(s.pu),
                (false, false) => split.mis_second.push(s.pu),
            }
        }
    }
    Ok(split)
}

/// Builds the `2 x (K + 1)` contingency table for one window pair.
///
/// The bucket spec is fitted on the first window's correct PU values
/// only; both windows are then counted over the same spec. The
/// misclassified column is omitted when both windows are error-free,
/// keeping every column marginal positive.
pub fn build_table(
    correct_first: &[f64],
    correct_second: &[f64],
    mis_first: &[f64],
    mis_second: &[f64],
    config: &BucketingConfig,
) -> Result<(ContingencyTable, BucketSpec), DetectorError> {
    if correct_first.is_empty() {
        return Err(DetectorError::NoTrainingData);
    }
    let spec = bucketing::fit(correct_first, config);
    let table = table_from_spec(
        &spec,
        correct_first,
        correct_second,
        mis_first.len(),
        mis_second.len(),
    )?;
    Ok((table, spec))
}

/// Counts both windows over an already-fitted spec. Shared with the
/// incremental detector, which replays it with frozen specs.
pub(crate) fn table_from_spec(
    spec: &BucketSpec,
    correct_first: &[f64],
    correct_second: &[f64],
    mis_first: usize,
    mis_second: usize,
) -> Result<ContingencyTable, DetectorError> {
    let mut row1: Vec<u64> = spec
        .histogram(correct_first)
        .expect("PU values are in [0, 1]");
    let mut row2: Vec<u64> = spec
        .histogram(correct_second)
        .expect("PU values are in [0, 1]");
    if mis_first + mis_second > 0 {
        row1.push(mis_first as u64);
        row2.push(mis_second as u64);
    }
    ContingencyTable::new(row1, row2).map_err(|_| DetectorError::DegenerateTable)
}

/// Evaluates one cut end to end: split sizes in, outcome out.
fn evaluate_cut(split: &WindowSplit, config: &DetectorConfig) -> CutOutcome {
    let heuristic = config.skip_heuristic;
    if !heuristic.should_test(mis_mean(&split.mis_first), mis_mean(&split.mis_second)) {
        return CutOutcome::SkippedHeuristic;
    }
    let built = build_table(
        &split.correct_first,
        &split.correct_second,
        &split.mis_first,
        &split.mis_second,
        &config.bucketing,
    );
    let (table, _spec) = match built {
        Ok(pair) => pair,
        Err(_) => return CutOutcome::Degenerate,
    };
    match chi2::chi_square_test(&table) {
        Ok(result) => CutOutcome::Tested {
            p_value: result.p_value,
        },
        Err(_) => CutOutcome::Degenerate,
    }
}

/// Runs the detector over every cut of the substream.
///
/// Cuts are evaluated independently (in parallel) and the report is
/// assembled in cut order, so the outcome is deterministic.
pub fn detect(sub: &SubStream, config: &DetectorConfig) -> DetectionReport {
    let (Some(t1), Some(t)) = (sub.first_index(), sub.last_index()) else {
        return DetectionReport::default();
    };
    if t1 == t {
        return DetectionReport::default();
    }
    let per_cut: Vec<CutEval> = (t1..t)
        .into_par_iter()
        .map(|cut| {
            let split = split_at_cut(sub, cut).expect("cut within range");
            CutEval {
                cut,
                outcome: evaluate_cut(&split, config),
            }
        })
        .collect();
    assemble_report(per_cut, config.sigma)
}

/// Builds the alarm decision from per-cut outcomes.
pub(crate) fn assemble_report(per_cut: Vec<CutEval>, sigma: f64) -> DetectionReport {
    let mut min_p: Option<f64> = None;
    let mut chosen: Option<u64> = None;
    for eval in &per_cut {
        if let CutOutcome::Tested { p_value } = eval.outcome {
            if min_p.is_none_or(|m| p_value < m) {
                min_p = Some(p_value);
                chosen = Some(eval.cut);
            }
        }
    }
    let alarm = min_p.is_some_and(|p| p < sigma);
    DetectionReport {
        per_cut,
        min_p,
        alarm,
        chosen_cut: if alarm { chosen } else { None },
    }
}

/// Discards antiquated chunks after an alarm: only chunks strictly after
/// the chosen cut survive.
pub fn on_alarm(sub: &SubStream, chosen_cut: u64) -> SubStream {
    SubStream::from_chunks(
        sub.chunks()
            .iter()
            .filter(|c| c.index > chosen_cut)
            .cloned()
            .collect(),
    )
}

/// Executable identity behind PU-histogram testing: if two windows have
/// identical correctness-histogram proportions (bin 0 holds all correct
/// instances, the remaining bins partition misclassified PU values over
/// `mis_edges`), their error rates are equal exactly and their error
/// standard deviations match `sqrt(e - e^2)`.
///
/// Returns the truth of the implication for the given pair, so it can be
/// asserted over generated inputs. Proportion and rate comparisons use
/// integer cross-multiplication; the standard-deviation identity is
/// checked to 1e-12.
pub fn equal_proportions_imply_equal_error_stats(window1: &[PuSample], window2: &[PuSample], mis_edges: &[f64]) -> bool {
    let hist = |w: &[PuSample]| -> Vec<u64> {
        let mut bins = vec![0u64; mis_edges.len()]; // bin 0 + (edges - 1) bins
        for s in w {
            if s.correct {
                bins[0] += 1;
            } else {
                let inner = &mis_edges[1..mis_edges.len() - 1];
                bins[1 + inner.partition_point(|&b| b <= s.pu)] += 1;
            }
        }
        bins
    };
    let (h1, h2) = (hist(window1), hist(window2));
    let (n1, n2) = (window1.len() as u128, window2.len() as u128);
    if n1 == 0 || n2 == 0 {
        return true;
    }
    let proportions_equal = h1
        .iter()
        .zip(&h2)
        .all(|(&a, &b)| a as u128 * n2 == b as u128 * n1);
    if !proportions_equal {
        return true; // implication is vacuous
    }

    let mis1 = window1.iter().filter(|s| !s.correct).count() as u128;
    let mis2 = window2.iter().filter(|s| !s.correct).count() as u128;
    let rates_equal = mis1 * n2 == mis2 * n1;

    let stds_ok = [window1, window2].iter().all(|w| {
        let n = w.len() as f64;
        let rate = w.iter().filter(|s| !s.correct).count() as f64 / n;
        let direct = (w
            .iter()
            .map(|s| {
                let e = if s.correct { 0.0 } else { 1.0 };
                (e - rate) * (e - rate)
            })
            .sum::<f64>()
            / n)
            .sqrt();
        (direct - (rate - rate * rate).sqrt()).abs() <= 1e-12
    });
    let rate1 = mis1 as f64 / n1 as f64;
    let rate2 = mis2 as f64 / n2 as f64;
    let std_equal = ((rate1 - rate1 * rate1).sqrt() - (rate2 - rate2 * rate2).sqrt()).abs() <= 1e-12;

    rates_equal && stds_ok && std_equal
}
