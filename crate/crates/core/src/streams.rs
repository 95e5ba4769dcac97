//! Seeded synthetic drifting stream generators.
//!
//! SEA, SINE and MIXED produce labelled feature vectors in fixed-size
//! chunks, switching the labelling concept on a configurable schedule.
//! Two further generators back the theoretical test suites: a pair of
//! windows with identical error rates but disjoint PU-index histograms,
//! and window pairs with identical correctness-histogram proportions.

use crate::detector::PuSample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{self, Write};

/// When and how often the labelling concept changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriftSchedule {
    /// The concept switches every this many chunks.
    pub period_chunks: usize,
    /// Instances per chunk (the paper's `M`).
    pub chunk_size: usize,
    /// Total chunks to emit.
    pub n_chunks: usize,
}

impl Default for DriftSchedule {
    fn default() -> Self {
        Self {
            period_chunks: 10,
            chunk_size: 1000,
            n_chunks: 100,
        }
    }
}

impl DriftSchedule {
    /// Index into a concept list for a given chunk.
    fn concept_index(&self, chunk: usize, n_concepts: usize) -> usize {
        (chunk / self.period_chunks.max(1)) % n_concepts.max(1)
    }

    /// Chunk indices where the active concept differs from the previous
    /// chunk's concept.
    pub fn drift_chunks(&self, n_concepts: usize) -> Vec<usize> {
        (1..self.n_chunks)
            .filter(|&c| {
                self.concept_index(c, n_concepts) != self.concept_index(c - 1, n_concepts)
            })
            .collect()
    }
}

/// One labelled stream instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub x: Vec<f64>,
    pub y: usize,
}

/// Common interface the evaluation harness drives.
pub trait ChunkStream: Iterator<Item = Vec<LabeledInstance>> {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    /// Ground-truth drift positions (chunk indices).
    fn drift_chunks(&self) -> Vec<usize>;
}

/// SEA: three uniform features on `[0, 10]`, label is
/// `x1 + x2 <= theta`, with the threshold cycling through a concept list.
/// A percentage of labels is flipped uniformly at random.
pub struct SeaStream {
    rng: ChaCha8Rng,
    schedule: DriftSchedule,
    thetas: Vec<f64>,
    noise_pct: u8,
    chunk: usize,
}

/// Conventional SEA thresholds, one per concept block.
pub const SEA_DEFAULT_THETAS: [f64; 4] = [8.0, 9.0, 7.0, 9.5];

impl SeaStream {
    pub fn new(seed: u64, schedule: DriftSchedule, thetas: Vec<f64>, noise_pct: u8) -> Self {
        assert!(!thetas.is_empty());
        assert!(noise_pct <= 100);
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            schedule,
            thetas,
            noise_pct,
            chunk: 0,
        }
    }

    /// The label rule without noise, exposed for direct checks.
    pub fn rule(theta: f64, x: &[f64]) -> usize {
        usize::from(x[0] + x[1] <= theta)
    }
}

impl Iterator for SeaStream {
    type Item = Vec<LabeledInstance>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.chunk >= self.schedule.n_chunks {
            return None;
        }
        let theta = self.thetas[self.schedule.concept_index(self.chunk, self.thetas.len())];
        let chunk = (0..self.schedule.chunk_size)
            .map(|_| {
                let x = vec![
                    self.rng.gen::<f64>() * 10.0,
                    self.rng.gen::<f64>() * 10.0,
                    self.rng.gen::<f64>() * 10.0,
                ];
                let mut y = Self::rule(theta, &x);
                if self.noise_pct > 0 && self.rng.gen_range(0u8..100) < self.noise_pct {
                    y = 1 - y;
                }
                LabeledInstance { x, y }
            })
            .collect();
        self.chunk += 1;
        Some(chunk)
    }
}

impl ChunkStream for SeaStream {
    fn n_features(&self) -> usize {
        3
    }
    fn n_classes(&self) -> usize {
        2
    }
    fn drift_chunks(&self) -> Vec<usize> {
        self.schedule.drift_chunks(self.thetas.len())
    }
}

/// SINE concepts: the plain sine rule or its reversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SineConcept {
    /// `y = 1` iff `x2 < sin(x1)`.
    Normal,
    /// All labels inverted.
    Reversed,
}

/// SINE: two uniform features on `[0, 1]`, labels from a sine boundary,
/// concept alternating per schedule.
pub struct SineStream {
    rng: ChaCha8Rng,
    schedule: DriftSchedule,
    concepts: Vec<SineConcept>,
    chunk: usize,
}

impl SineStream {
    pub fn new(seed: u64, schedule: DriftSchedule, concepts: Vec<SineConcept>) -> Self {
        assert!(!concepts.is_empty());
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            schedule,
            concepts,
            chunk: 0,
        }
    }

    pub fn alternating() -> Vec<SineConcept> {
        vec![SineConcept::Normal, SineConcept::Reversed]
    }

    pub fn rule(concept: SineConcept, x: &[f64]) -> usize {
        let base = usize::from(x[1] < x[0].sin());
        match concept {
            SineConcept::Normal => base,
            SineConcept::Reversed => 1 - base,
        }
    }
}

impl Iterator for SineStream {
    type Item = Vec<LabeledInstance>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.chunk >= self.schedule.n_chunks {
            return None;
        }
        let concept = self.concepts[self.schedule.concept_index(self.chunk, self.concepts.len())];
        let chunk = (0..self.schedule.chunk_size)
            .map(|_| {
                let x = vec![self.rng.gen::<f64>(), self.rng.gen::<f64>()];
                let y = Self::rule(concept, &x);
                LabeledInstance { x, y }
            })
            .collect();
        self.chunk += 1;
        Some(chunk)
    }
}

impl ChunkStream for SineStream {
    fn n_features(&self) -> usize {
        2
    }
    fn n_classes(&self) -> usize {
        2
    }
    fn drift_chunks(&self) -> Vec<usize> {
        self.schedule.drift_chunks(self.concepts.len())
    }
}

/// MIXED concepts: majority-of-three rule or its reversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedConcept {
    /// `y = 1` iff at least two of `{v, w, x4 < 0.5 + 0.3 sin(3 pi x3)}`.
    Normal,
    Reversed,
}

/// MIXED: two boolean features (encoded 0/1) and two uniform numeric
/// features on `[0, 1]`.
pub struct MixedStream {
    rng: ChaCha8Rng,
    schedule: DriftSchedule,
    concepts: Vec<MixedConcept>,
    chunk: usize,
}

impl MixedStream {
    pub fn new(seed: u64, schedule: DriftSchedule, concepts: Vec<MixedConcept>) -> Self {
        assert!(!concepts.is_empty());
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            schedule,
            concepts,
            chunk: 0,
        }
    }

    pub fn alternating() -> Vec<MixedConcept> {
        vec![MixedConcept::Normal, MixedConcept::Reversed]
    }

    pub fn rule(concept: MixedConcept, x: &[f64]) -> usize {
        let conditions = usize::from(x[0] >= 0.5)
            + usize::from(x[1] >= 0.5)
            + usize::from(x[3] < 0.5 + 0.3 * (3.0 * std::f64::consts::PI * x[2]).sin());
        let base = usize::from(conditions >= 2);
        match concept {
            MixedConcept::Normal => base,
            MixedConcept::Reversed => 1 - base,
        }
    }
}

impl Iterator for MixedStream {
    type Item = Vec<LabeledInstance>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.chunk >= self.schedule.n_chunks {
            return None;
        }
        let concept = self.concepts[self.schedule.concept_index(self.chunk, self.concepts.len())];
        let chunk = (0..self.schedule.chunk_size)
            .map(|_| {
                let x = vec![
                    f64::from(u8::from(self.rng.gen::<bool>())),
                    f64::from(u8::from(self.rng.gen::<bool>())),
                    self.rng.gen::<f64>(),
                    self.rng.gen::<f64>(),
                ];
                let y = Self::rule(concept, &x);
                LabeledInstance { x, y }
            })
            .collect();
        self.chunk += 1;
        Some(chunk)
    }
}

impl ChunkStream for MixedStream {
    fn n_features(&self) -> usize {
        4
    }
    fn n_classes(&self) -> usize {
        2
    }
    fn drift_chunks(&self) -> Vec<usize> {
        self.schedule.drift_chunks(self.concepts.len())
    }
}

/// Two PU-sample windows with identical error rates (exactly 0.5) and
/// identical error standard deviations (exactly 0.5) whose PU histograms
/// have disjoint support.
///
/// Window 1: half the instances misclassified with PU in `(0.9, 1.0]`,
/// half correct with PU in `[0.0, 0.1)`. Window 2: half misclassified in
/// `(0.8, 0.9]`, half correct in `(0.1, 0.2]`. Each window is shuffled so
/// the error sequence is exchangeable.
pub fn gen_equal_error_counterexample(
    seed: u64,
    n_per_window: usize,
) -> (Vec<PuSample>, Vec<PuSample>) {
    assert!(n_per_window >= 2 && n_per_window.is_multiple_of(2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n_per_window / 2;
    let mut build = |mis_top: f64, correct_top: f64| {
        let mut window = Vec::with_capacity(n_per_window);
        for _ in 0..half {
            // Intervals are right-closed: top - U[0, 0.1).
            window.push(PuSample::new(mis_top - rng.gen::<f64>() * 0.1, false));
        }
        for _ in 0..half {
            let pu = if correct_top <= 0.1 {
                rng.gen::<f64>() * 0.1
            } else {
                correct_top - rng.gen::<f64>() * 0.1
            };
            window.push(PuSample::new(pu, true));
        }
        window.shuffle(&mut rng);
        window
    };
    let w1 = build(1.0, 0.1);
    let w2 = build(0.9, 0.2);
    (w1, w2)
}

/// A window pair with identical correctness-histogram proportions: the
/// same fraction of correct instances and the same per-bin fractions of
/// misclassified PU values, with window 2 scaled by an integer factor.
/// PU values inside each bin are free, so the pair exercises the claim
/// that proportions alone pin down the error statistics.
///
/// Returns the two windows and the misclassified-bin edges.
pub fn gen_equal_proportion_windows(seed: u64) -> (Vec<PuSample>, Vec<PuSample>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_bins = rng.gen_range(2..6usize);
    let mut edges = vec![0.0];
    for _ in 0..n_bins - 1 {
        edges.push(rng.gen::<f64>());
    }
    edges.push(1.0);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup();

    let correct_base = rng.gen_range(1..30u32);
    let mis_base: Vec<u32> = (0..edges.len() - 1)
        .map(|_| rng.gen_range(0..20u32))
        .collect();
    let scale = rng.gen_range(1..4u32);

    let make = |factor: u32, rng: &mut ChaCha8Rng| {
        let mut w = Vec::new();
        for _ in 0..correct_base * factor {
            w.push(PuSample::new(rng.gen::<f64>(), true));
        }
        for (b, &count) in mis_base.iter().enumerate() {
            let (lo, hi) = (edges[b], edges[b + 1]);
            for _ in 0..count * factor {
                w.push(PuSample::new(lo + rng.gen::<f64>() * (hi - lo), false));
            }
        }
        w.shuffle(rng);
        w
    };
    let w1 = make(1, &mut rng);
    let w2 = make(scale, &mut rng);
    (w1, w2, edges)
}

/// Writes chunks to CSV: a header of feature names plus a trailing label
/// column, one instance per line.
pub fn export_csv<W: Write>(
    chunks: impl Iterator<Item = Vec<LabeledInstance>>,
    n_features: usize,
    out: &mut W,
) -> io::Result<()> {
    let header: Vec<String> = (1..=n_features)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for chunk in chunks {
        for inst in chunk {
            for v in &inst.x {
                write!(out, "{v},")?;
            }
            writeln!(out, "{}", inst.y)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect_all(stream: impl Iterator<Item = Vec<LabeledInstance>>) -> Vec<LabeledInstance> {
        stream.flatten().collect()
    }

    #[test]
    fn sea_rule_direct() {
        assert_eq!(SeaStream::rule(8.0, &[3.0, 4.0, 0.0]), 1);
        assert_eq!(SeaStream::rule(8.0, &[5.0, 4.0, 0.0]), 0);
    }

    #[test]
    fn sea_noise_free_labels_match_rule() {
        let schedule = DriftSchedule {
            n_chunks: 3,
            chunk_size: 500,
            ..DriftSchedule::default()
        };
        let stream = SeaStream::new(1, schedule, vec![8.0], 0);
        for inst in collect_all(stream) {
            assert_eq!(inst.y, SeaStream::rule(8.0, &inst.x));
        }
    }

    #[test]
    fn sea_noise_fraction_concentrates() {
        let schedule = DriftSchedule {
            n_chunks: 100,
            chunk_size: 1000,
            ..DriftSchedule::default()
        };
        let stream = SeaStream::new(2, schedule, vec![8.0], 10);
        let flipped = collect_all(stream)
            .iter()
            .filter(|i| i.y != SeaStream::rule(8.0, &i.x))
            .count();
        let fraction = flipped as f64 / 100_000.0;
        assert!((fraction - 0.10).abs() < 0.005, "fraction = {fraction}");
    }

    #[test]
    fn sine_rule_and_flip() {
        assert_eq!(SineStream::rule(SineConcept::Normal, &[0.0, 0.5]), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let a = SineStream::rule(SineConcept::Normal, &x);
            let b = SineStream::rule(SineConcept::Reversed, &x);
            assert_eq!(a, 1 - b);
        }
    }

    #[test]
    fn sine_class_balance_matches_integral() {
        let schedule = DriftSchedule {
            n_chunks: 100,
            chunk_size: 1000,
            ..DriftSchedule::default()
        };
        let stream = SineStream::new(4, schedule, vec![SineConcept::Normal]);
        let positives = collect_all(stream).iter().filter(|i| i.y == 1).count();
        let fraction = positives as f64 / 100_000.0;
        // integral of sin on [0, 1] = 1 - cos(1) ~ 0.4597
        assert!((fraction - (1.0 - 1f64.cos())).abs() < 0.01, "{fraction}");
    }

    #[test]
    fn mixed_rule_booleans_dominate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = [1.0, 1.0, rng.gen::<f64>(), rng.gen::<f64>()];
            assert_eq!(MixedStream::rule(MixedConcept::Normal, &x), 1);
            assert_eq!(MixedStream::rule(MixedConcept::Reversed, &x), 0);
        }
    }

    #[test]
    fn mixed_balance_matches_rule_measure() {
        // P(y = 1) = P(two of three conditions). With z = P(x4 < 0.5 +
        // 0.3 sin(3 pi x3)) = 0.5 + 0.3 * 2 / (3 pi), the majority rule
        // over (0.5, 0.5, z) has measure 0.25 + 0.5 * z ~ 0.5318.
        let z = 0.5 + 0.3 * 2.0 / (3.0 * std::f64::consts::PI);
        let expected = 0.25 + 0.5 * z;
        let schedule = DriftSchedule {
            n_chunks: 100,
            chunk_size: 1000,
            ..DriftSchedule::default()
        };
        let stream = MixedStream::new(6, schedule, vec![MixedConcept::Normal]);
        let positives = collect_all(stream).iter().filter(|i| i.y == 1).count();
        let fraction = positives as f64 / 100_000.0;
        assert!((fraction - expected).abs() < 0.01, "{fraction} vs {expected}");
    }

    #[test]
    fn streams_are_deterministic() {
        let schedule = DriftSchedule {
            n_chunks: 5,
            chunk_size: 100,
            ..DriftSchedule::default()
        };
        let a = collect_all(SeaStream::new(
            9,
            schedule.clone(),
            SEA_DEFAULT_THETAS.to_vec(),
            10,
        ));
        let b = collect_all(SeaStream::new(
            9,
            schedule,
            SEA_DEFAULT_THETAS.to_vec(),
            10,
        ));
        assert_eq!(a, b);
    }

    #[test]
    fn drift_chunks_fall_on_period_boundaries() {
        let schedule = DriftSchedule {
            period_chunks: 10,
            chunk_size: 10,
            n_chunks: 40,
        };
        assert_eq!(schedule.drift_chunks(2), vec![10, 20, 30]);
        assert_eq!(schedule.drift_chunks(1), Vec::<usize>::new());
    }

    #[test]
    fn counterexample_windows_have_exact_error_stats() {
        let (w1, w2) = gen_equal_error_counterexample(1, 4);
        for w in [&w1, &w2] {
            assert_eq!(w.len(), 4);
            assert_eq!(w.iter().filter(|s| !s.correct).count(), 2);
        }
        let (w1, w2) = gen_equal_error_counterexample(2, 1000);
        for w in [&w1, &w2] {
            let mis = w.iter().filter(|s| !s.correct).count();
            let rate = mis as f64 / w.len() as f64;
            assert_eq!(rate, 0.5);
            let std = (rate - rate * rate).sqrt();
            assert_eq!(std, 0.5);
        }
    }

    #[test]
    fn counterexample_supports_are_disjoint() {
        let (w1, w2) = gen_equal_error_counterexample(3, 2000);
        for s in &w1 {
            if s.correct {
                assert!(s.pu < 0.1 + 1e-12);
            } else {
                assert!(s.pu > 0.9 && s.pu <= 1.0);
            }
        }
        for s in &w2 {
            if s.correct {
                assert!(s.pu > 0.1 && s.pu <= 0.2);
            } else {
                assert!(s.pu > 0.8 && s.pu <= 0.9);
            }
        }
    }

    #[test]
    fn csv_export_schema() {
        let schedule = DriftSchedule {
            n_chunks: 1,
            chunk_size: 3,
            ..DriftSchedule::default()
        };
        let stream = SineStream::new(1, schedule, vec![SineConcept::Normal]);
        let mut buf = Vec::new();
        export_csv(stream, 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,x2,label"));
        assert_eq!(lines.count(), 3);
    }
}
