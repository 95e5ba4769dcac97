//! Streaming concept-drift detection built on the prediction-uncertainty
//! index (PU-index).
//!
//! A classifier's PU-index for an instance is one minus the probability it
//! assigns to the true class. Drift is detected by comparing PU-index
//! histograms of two windows of the stream with Pearson's Chi-square test,
//! where the histogram bins come from an adaptive 1-D k-means partition
//! (Ei-kMeans with amplify-shrink rebalancing).
//!
//! The crate provides:
//!
//! - [`chi2`]: contingency tables, the Chi-square statistic, and p-values.
//! - [`bucketing`]: adaptive PU-index bucketing (1-D Ei-kMeans).
//! - [`classifiers`]: an incremental Gaussian naive Bayes probe classifier
//!   and PU-index extraction.
//! - [`detector`]: the batch PU-index drift detector over chunked substreams.
//! - [`incremental`]: the online instance-based detector with cached cuts
//!   and O(K) table updates.
//! - [`baselines`]: DDM and Page-Hinkley error-rate detectors.
//! - [`streams`]: seeded synthetic drifting stream generators (SEA, SINE,
//!   MIXED, equal-error counterexample).
//! - [`harness`]: prequential (test-then-train) evaluation, metrics, and
//!   experiment configuration.

pub mod baselines;
pub mod bucketing;
pub mod chi2;
pub mod classifiers;
pub mod detector;
pub mod harness;
pub mod incremental;
pub mod streams;

pub use bucketing::{BucketSpec, BucketingConfig};
pub use chi2::{ChiSquareResult, ContingencyTable};
pub use detector::{Chunk, DetectionReport, DetectorConfig, PuSample, SkipHeuristic, SubStream};
pub use incremental::OnlineDetector;
