//! Incremental Gaussian naive Bayes probe classifier and PU-index
//! extraction.
//!
//! The model keeps streaming sufficient statistics (per-class Welford mean
//! and variance per feature), so `partial_fit` is a single pass and a
//! refit from scratch reproduces the same statistics. Likelihoods are
//! evaluated in the log domain and normalized by max-subtraction so the
//! emitted probabilities never saturate to exactly 0 or 1; the PU values
//! derived from them stay inside the open unit interval.

use thiserror::Error;

/// Probabilities are clamped into `[PROB_FLOOR, 1 - PROB_FLOOR]`.
const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifierError {
    /// Some class has no training data yet.
    #[error("class {class} has no training instances")]
    UntrainedClass { class: usize },
    /// Feature vector length does not match the model.
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Class label outside `[0, n_classes)`.
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
}

/// Streaming Gaussian naive Bayes model.
#[derive(Debug, Clone)]
pub struct GnbModel {
    n_classes: usize,
    n_features: usize,
    class_counts: Vec<u64>,
    // Per class, per feature: running mean and sum of squared deviations.
    means: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
    // Pooled per-feature statistics, used only for variance smoothing.
    pooled_count: u64,
    pooled_means: Vec<f64>,
    pooled_m2: Vec<f64>,
}

impl GnbModel {
    pub fn new(n_classes: usize, n_features: usize) -> Self {
        assert!(n_classes >= 2, "need at least two classes");
        assert!(n_features >= 1, "need at least one feature");
        Self {
            n_classes,
            n_features,
            class_counts: vec![0; n_classes],
            means: vec![vec![0.0; n_features]; n_classes],
            m2: vec![vec![0.0; n_features]; n_classes],
            pooled_count: 0,
            pooled_means: vec![0.0; n_features],
            pooled_m2: vec![0.0; n_features],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_count(&self, class: usize) -> u64 {
        self.class_counts[class]
    }

    /// True when every class has at least one training instance.
    pub fn is_trained(&self) -> bool {
        self.class_counts.iter().all(|&c| c > 0)
    }

    /// Running mean of one feature within one class.
    pub fn class_mean(&self, class: usize, feature: usize) -> f64 {
        self.means[class][feature]
    }

    /// Unsmoothed population variance of one feature within one class.
    pub fn class_variance(&self, class: usize, feature: usize) -> f64 {
        let n = self.class_counts[class];
        if n == 0 {
            0.0
        } else {
            self.m2[class][feature] / n as f64
        }
    }

    /// Variance added to every Gaussian: `1e-9` times the largest pooled
    /// feature variance, floored at `1e-12`. Keeps likelihoods finite on
    /// constant features.
    pub fn smoothing(&self) -> f64 {
        let max_var = if self.pooled_count == 0 {
            0.0
        } else {
            self.pooled_m2
                .iter()
                .map(|&m2| m2 / self.pooled_count as f64)
                .fold(0.0, f64::max)
        };
        (1e-9 * max_var).max(1e-12)
    }

    /// Absorbs one labelled instance (single-pass Welford update).
    pub fn partial_fit(&mut self, x: &[f64], y: usize) -> Result<(), ClassifierError> {
        if x.len() != self.n_features {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        if y >= self.n_classes {
            return Err(ClassifierError::LabelOutOfRange {
                label: y,
                n_classes: self.n_classes,
            });
        }
        self.class_counts[y] += 1;
        let n = self.class_counts[y] as f64;
        for (f, &v) in x.iter().enumerate() {
            let delta = v - self.means[y][f];
            self.means[y][f] += delta / n;
            self.m2[y][f] += delta * (v - self.means[y][f]);
        }
        self.pooled_count += 1;
        let n = self.pooled_count as f64;
        for (f, &v) in x.iter().enumerate() {
            let delta = v - self.pooled_means[f];
            self.pooled_means[f] += delta / n;
            self.pooled_m2[f] += delta * (v - self.pooled_means[f]);
        }
        Ok(())
    }

    /// Drops all statistics (used by the train-once-until-alarm regime).
    pub fn reset(&mut self) {
        *self = Self::new(self.n_classes, self.n_features);
    }

    /// Class-probability vector for one instance.
    ///
    /// Gaussian log-likelihood plus log-prior per class, normalized via
    /// max-subtraction. Components are strictly inside `(0, 1)` and sum to
    /// 1 within floating tolerance.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if x.len() != self.n_features {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        if let Some(class) = self.class_counts.iter().position(|&c| c == 0) {
            return Err(ClassifierError::UntrainedClass { class });
        }
        let eps = self.smoothing();
        let total = self.pooled_count as f64;
        let mut logits = Vec::with_capacity(self.n_classes);
        for c in 0..self.n_classes {
            let mut logit = (self.class_counts[c] as f64 / total).ln();
            for (f, &v) in x.iter().enumerate() {
                let var = self.class_variance(c, f) + eps;
                let d = v - self.means[c][f];
                logit += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var);
            }
            logits.push(logit);
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p = (*p / sum).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        }
        Ok(probs)
    }
}

/// The PU-index of a prediction: one minus the probability assigned to
/// the true class.
pub fn pu_index(proba: &[f64], y_true: usize) -> Result<f64, ClassifierError> {
    if y_true >= proba.len() {
        return Err(ClassifierError::LabelOutOfRange {
            label: y_true,
            n_classes: proba.len(),
        });
    }
    Ok(1.0 - proba[y_true])
}

/// 0/1 error indicator: 1 iff the argmax class differs from the truth.
/// Argmax ties resolve to the lowest class index.
pub fn error_indicator(proba: &[f64], y_true: usize) -> Result<u8, ClassifierError> {
    if y_true >= proba.len() {
        return Err(ClassifierError::LabelOutOfRange {
            label: y_true,
            n_classes: proba.len(),
        });
    }
    let mut best = 0usize;
    for (i, &p) in proba.iter().enumerate() {
        if p > proba[best] {
            best = i;
        }
    }
    Ok(u8::from(best != y_true))
}
