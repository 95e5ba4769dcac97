//! Adaptive PU-index bucketing: a 1-D Ei-kMeans partition of `[0, 1]`.
//!
//! Correctly-classified PU values are split into `k` bins so that every
//! bin holds enough mass for a valid Chi-square test. The pipeline is:
//!
//! 1. centroid initialization by repeatedly taking the point with the
//!    largest 1-NN distance and removing it with its `N/k` nearest
//!    neighbors,
//! 2. plain 1-D Lloyd iterations to convergence,
//! 3. amplify-shrink rounds that scale each point-to-centroid distance by
//!    `exp(theta * |C_j| / (N - 1))` and reassign, deflating overcrowded
//!    clusters,
//! 4. adjacent-bin merging until every bin count reaches the expected-count
//!    floor (or a single bin remains).
//!
//! Because the space is one-dimensional, the final partition is stored as
//! sorted bin edges (midpoints between adjacent centroids, plus 0 and 1),
//! and assignment is a binary search instead of a distance matrix.

use thiserror::Error;

/// Errors from bucket fitting and assignment.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BucketingError {
    /// Not enough samples to run centroid initialization; callers fall
    /// back to equal-width bins.
    #[error("need at least {needed} samples for {k} centroids, got {got}")]
    TooFewSamples { needed: usize, got: usize, k: usize },
    /// A value escaped the unit interval.
    #[error("value {value} outside [0, 1]")]
    OutOfRange { value: f64 },
}

/// Hyperparameters of the bucketing pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketingConfig {
    /// Requested number of bins (the paper's `K`).
    pub k_init: usize,
    /// Amplification coefficient `theta` controlling how hard crowded
    /// clusters are deflated.
    pub theta: f64,
    /// Expected-count floor each bin must reach (chi-square validity).
    pub min_expected: f64,
    /// Cap on amplify-shrink rounds before falling back to merging.
    pub max_amplify_rounds: usize,
}

impl Default for BucketingConfig {
    fn default() -> Self {
        Self {
            k_init: 5,
            theta: 2.0,
            min_expected: 5.0,
            max_amplify_rounds: 20,
        }
    }
}

impl BucketingConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k_init: k.max(1),
            ..Self::default()
        }
    }
}

/// An immutable 1-D partition of `[0, 1]` into `k` bins.
///
/// `boundaries` always starts at 0.0 and ends at 1.0; interior edges are
/// midpoints between adjacent centroids. Bins are left-closed and
/// right-open, except the last bin which also contains 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketSpec {
    centroids: Vec<f64>,
    boundaries: Vec<f64>,
}

impl BucketSpec {
    /// Builds a spec from sorted, strictly increasing centroids in `[0, 1]`.
    pub fn from_centroids(centroids: Vec<f64>) -> Self {
        assert!(!centroids.is_empty(), "at least one centroid required");
        debug_assert!(
            centroids.windows(2).all(|w| w[0] < w[1]),
            "centroids must be strictly increasing"
        );
        let mut boundaries = Vec::with_capacity(centroids.len() + 1);
        boundaries.push(0.0);
        for pair in centroids.windows(2) {
            boundaries.push(0.5 * (pair[0] + pair[1]));
        }
        boundaries.push(1.0);
        Self {
            centroids,
            boundaries,
        }
    }

    /// Builds a spec directly from bin edges (must start at 0 and end at 1).
    /// Centroids are taken as bin midpoints.
    pub fn from_boundaries(boundaries: Vec<f64>) -> Self {
        assert!(boundaries.len() >= 2, "need at least two edges");
        assert_eq!(boundaries[0], 0.0, "first edge must be 0");
        assert_eq!(*boundaries.last().unwrap(), 1.0, "last edge must be 1");
        debug_assert!(boundaries.windows(2).all(|w| w[0] < w[1]));
        let centroids = boundaries
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect();
        Self {
            centroids,
            boundaries,
        }
    }

    /// Number of bins.
    pub fn k(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Bin edges including 0 and 1; length `k + 1`.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Cluster centroids; length `k`.
    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    /// Maps a PU value to its bin index.
    ///
    /// A value equal to an interior edge belongs to the right bin; 1.0
    /// belongs to the last bin.
    pub fn assign(&self, value: f64) -> Result<usize, BucketingError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(BucketingError::OutOfRange { value });
        }
        let inner = &self.boundaries[1..self.boundaries.len() - 1];
        Ok(inner.partition_point(|&b| b <= value))
    }

    /// Counts how many values fall in each bin.
    pub fn histogram(&self, values: &[f64]) -> Result<Vec<u64>, BucketingError> {
        let mut counts = vec![0u64; self.k()];
        for &v in values {
            counts[self.assign(v)?] += 1;
        }
        Ok(counts)
    }

    /// Histogram over already-sorted in-range values; bulk counting via
    /// binary search on the edges.
    fn histogram_sorted(&self, sorted: &[f64]) -> Vec<u64> {
        let k = self.k();
        let mut counts = vec![0u64; k];
        let mut lo = 0usize;
        for (j, count) in counts.iter_mut().enumerate() {
            let hi = if j + 1 < k {
                sorted.partition_point(|&v| v < self.boundaries[j + 1])
            } else {
                sorted.len()
            };
            *count = (hi - lo) as u64;
            lo = hi;
        }
        counts
    }
}

/// Ei-kMeans centroid initialization.
///
/// Each of the `k` rounds selects the remaining point with the largest
/// 1-NN distance (ties prefer the point farthest from already selected
/// centroids, then the smaller value) and removes it together with its
/// `floor(N / k)` nearest remaining neighbors. If the working set runs dry
/// before `k` rounds, the rest are picked farthest-point style from the
/// original values.
pub fn init_centroids(values: &[f64], k: usize) -> Result<Vec<f64>, BucketingError> {
    assert!(k >= 1);
    if values.len() < 2 * k {
        return Err(BucketingError::TooFewSamples {
            needed: 2 * k,
            got: values.len(),
            k,
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("PU values are finite"));
    Ok(init_centroids_sorted(&sorted, k))
}

fn init_centroids_sorted(sorted: &[f64], k: usize) -> Vec<f64> {
    let n = sorted.len();
    let drop_per_round = n / k;

    // Doubly linked list over sorted indices for O(1) removal.
    let mut prev: Vec<isize> = (0..n as isize).map(|i| i - 1).collect();
    let mut next: Vec<isize> = (1..=n as isize).collect();
    next[n - 1] = -1;
    let mut head: isize = 0;
    let mut alive = n;

    let remove = |i: usize, prev: &mut [isize], next: &mut [isize], head: &mut isize| {
        let (p, nx) = (prev[i], next[i]);
        if p >= 0 {
            next[p as usize] = nx;
        } else {
            *head = nx;
        }
        if nx >= 0 {
            prev[nx as usize] = p;
        }
    };

    let mut centroids = Vec::with_capacity(k);
    for _ in 0..k {
        if alive == 0 {
            break;
        }
        // Scan for the alive point with the largest 1-NN distance.
        let mut best: Option<(usize, f64, f64)> = None; // (idx, nn_dist, centroid_dist)
        let mut i = head;
        while i >= 0 {
            let iu = i as usize;
            let left = if prev[iu] >= 0 {
                sorted[iu] - sorted[prev[iu] as usize]
            } else {
                f64::INFINITY
            };
            let right = if next[iu] >= 0 {
                sorted[next[iu] as usize] - sorted[iu]
            } else {
                f64::INFINITY
            };
            let nn = left.min(right);
            let cd = centroids
                .iter()
                .map(|&c: &f64| (sorted[iu] - c).abs())
                .fold(f64::INFINITY, f64::min);
            let better = match best {
                None => true,
                Some((_, bnn, bcd)) => {
                    nn > bnn || (nn == bnn && !centroids.is_empty() && cd > bcd)
                }
            };
            if better {
                best = Some((iu, nn, cd));
            }
            i = next[iu];
        }
        let (z, _, _) = best.expect("alive > 0");
        centroids.push(sorted[z]);

        // Remove z, then its nearest neighbors by expanding left/right.
        let (mut l, mut r) = (prev[z], next[z]);
        remove(z, &mut prev, &mut next, &mut head);
        alive -= 1;
        for _ in 0..drop_per_round {
            let dl = if l >= 0 {
                sorted[z] - sorted[l as usize]
            } else {
                f64::INFINITY
            };
            let dr = if r >= 0 {
                sorted[r as usize] - sorted[z]
            } else {
                f64::INFINITY
            };
            if dl.is_infinite() && dr.is_infinite() {
                break;
            }
            if dl <= dr {
                let lu = l as usize;
                l = prev[lu];
                remove(lu, &mut prev, &mut next, &mut head);
            } else {
                let ru = r as usize;
                r = next[ru];
                remove(ru, &mut prev, &mut next, &mut head);
            }
            alive -= 1;
        }
    }

    // Working set exhausted early: pad farthest-point style from the
    // original values, or from the widest gap if everything coincides.
    while centroids.len() < k {
        let mut best: Option<(f64, f64)> = None; // (dist_to_nearest_centroid, value)
        for &v in sorted {
            let d = centroids
                .iter()
                .map(|&c| (v - c).abs())
                .fold(f64::INFINITY, f64::min);
            let better = match best {
                None => true,
                Some((bd, bv)) => d > bd || (d == bd && v < bv),
            };
            if better {
                best = Some((d, v));
            }
        }
        match best {
            Some((d, v)) if d > 0.0 => centroids.push(v),
            _ => {
                let mut cs = centroids.clone();
                cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut edges = vec![0.0];
                edges.extend(cs);
                edges.push(1.0);
                let widest = edges
                    .windows(2)
                    .max_by(|a, b| (a[1] - a[0]).partial_cmp(&(b[1] - b[0])).unwrap())
                    .unwrap();
                centroids.push(0.5 * (widest[0] + widest[1]));
            }
        }
    }

    centroids.sort_by(|a, b| a.partial_cmp(b).unwrap());
    centroids
}

/// Fits a [`BucketSpec`] to the given PU values.
///
/// Never fails: windows too small for centroid initialization fall back to
/// equal-width bins, and bins that cannot reach the expected-count floor
/// are merged into their neighbors until the floor holds or one bin is
/// left.
pub fn fit(values: &[f64], config: &BucketingConfig) -> BucketSpec {
    assert!(!values.is_empty(), "fit requires at least one value");
    let k = config.k_init.max(1);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("PU values are finite"));
    debug_assert!(*sorted.first().unwrap() >= 0.0 && *sorted.last().unwrap() <= 1.0);

    let mut prefix = Vec::with_capacity(sorted.len() + 1);
    prefix.push(0.0);
    for &v in &sorted {
        prefix.push(prefix.last().unwrap() + v);
    }

    let mut centroids = if sorted.len() < 2 * k {
        // Equal-width fallback: centers of k uniform bins.
        (0..k).map(|j| (j as f64 + 0.5) / k as f64).collect()
    } else {
        let init = dedup_sorted(init_centroids_sorted(&sorted, k));
        lloyd(&sorted, &prefix, init)
    };

    // Amplify-shrink: deflate crowded clusters until the floor holds or
    // the rounds run out.
    for _ in 0..config.max_amplify_rounds {
        let spec = BucketSpec::from_centroids(centroids.clone());
        let counts = spec.histogram_sorted(&sorted);
        if counts_ok(&counts, config.min_expected) || spec.k() == 1 {
            break;
        }
        let membership = amplified_membership(&sorted, &centroids, &counts, config.theta);
        let new_centroids = membership_means(&sorted, &membership, centroids.len());
        if new_centroids == centroids {
            break;
        }
        centroids = new_centroids;
    }

    // Merge repair: collapse the smallest bin into its lighter neighbor
    // until every count reaches the floor.
    loop {
        let spec = BucketSpec::from_centroids(centroids.clone());
        let counts = spec.histogram_sorted(&sorted);
        if counts_ok(&counts, config.min_expected) || spec.k() == 1 {
            return spec;
        }
        let j = counts
            .iter()
            .enumerate()
            .min_by_key(|&(_, &c)| c)
            .map(|(j, _)| j)
            .unwrap();
        let nb = if j == 0 {
            1
        } else if j == counts.len() - 1 || counts[j - 1] <= counts[j + 1] {
            j - 1
        } else {
            j + 1
        };
        let (a, b) = (j.min(nb), j.max(nb));
        let (ca, cb) = (centroids[a], centroids[b]);
        let (na, nb_count) = (counts[a] as f64, counts[b] as f64);
        let merged = if na + nb_count > 0.0 {
            (ca * na + cb * nb_count) / (na + nb_count)
        } else {
            0.5 * (ca + cb)
        };
        centroids.remove(b);
        centroids[a] = merged;
        centroids = dedup_sorted(centroids);
    }
}

fn counts_ok(counts: &[u64], min_expected: f64) -> bool {
    counts.iter().all(|&c| c as f64 >= min_expected)
}

fn dedup_sorted(mut centroids: Vec<f64>) -> Vec<f64> {
    centroids.sort_by(|a, b| a.partial_cmp(b).unwrap());
    centroids.dedup();
    centroids
}

/// Lloyd iterations in 1-D over sorted values, using prefix sums for the
/// centroid updates. Assignment ties go to the lower centroid index, and
/// empty clusters are dropped. Stops when the assignment is stable or
/// after 100 iterations.
fn lloyd(sorted: &[f64], prefix: &[f64], mut centroids: Vec<f64>) -> Vec<f64> {
    let n = sorted.len();
    let mut prev_starts: Vec<usize> = Vec::new();
    for _ in 0..100 {
        let k = centroids.len();
        let mut starts = Vec::with_capacity(k + 1);
        starts.push(0);
        for j in 0..k.saturating_sub(1) {
            let mid = 0.5 * (centroids[j] + centroids[j + 1]);
            // Tie at the midpoint goes to the lower index, so bin j + 1
            // starts strictly after values equal to mid.
            starts.push(sorted.partition_point(|&v| v <= mid));
        }
        starts.push(n);
        if starts == prev_starts {
            break;
        }
        let mut updated = Vec::with_capacity(k);
        for j in 0..k {
            let (lo, hi) = (starts[j], starts[j + 1]);
            if lo < hi {
                updated.push((prefix[hi] - prefix[lo]) / (hi - lo) as f64);
            }
        }
        let updated = dedup_sorted(updated);
        if updated == centroids {
            break;
        }
        centroids = updated;
        prev_starts = starts;
    }
    centroids
}

/// One amplify-shrink reassignment: each distance `|v - c_j|` is scaled by
/// `exp(theta * count_j / (N - 1))` and every point moves to the argmin
/// (ties to the lower index). Returns the new membership per value.
pub(crate) fn amplified_membership(
    sorted: &[f64],
    centroids: &[f64],
    counts: &[u64],
    theta: f64,
) -> Vec<usize> {
    let denom = (sorted.len().saturating_sub(1)).max(1) as f64;
    let factors: Vec<f64> = counts
        .iter()
        .map(|&c| (theta * c as f64 / denom).exp())
        .collect();
    sorted
        .iter()
        .map(|&v| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (j, (&c, &f)) in centroids.iter().zip(&factors).enumerate() {
                let d = (v - c).abs() * f;
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

fn membership_means(sorted: &[f64], membership: &[usize], k: usize) -> Vec<f64> {
    let mut sums = vec![0.0f64; k];
    let mut counts = vec![0u64; k];
    for (&v, &m) in sorted.iter().zip(membership) {
        sums[m] += v;
        counts[m] += 1;
    }
    let means = sums
        .iter()
        .zip(&counts)
        .filter(|&(_, &c)| c > 0)
        .map(|(&s, &c)| s / c as f64)
        .collect();
    dedup_sorted(means)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn init_three_points_one_centroid() {
        // All 1-NN distances tie at 0.5; the smaller value wins.
        let c = init_centroids(&[0.0, 0.5, 1.0], 1).unwrap();
        assert_eq!(c, vec![0.0]);
    }

    #[test]
    fn init_uniform_points_are_distinct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
        let c = init_centroids(&values, 5).unwrap();
        assert_eq!(c.len(), 5);
        for w in c.windows(2) {
            assert!(w[0] < w[1], "centroids not distinct: {c:?}");
        }
    }

    #[test]
    fn init_duplicated_grid_selects_extremes() {
        let mut values = Vec::new();
        for i in 0..10 {
            for _ in 0..10 {
                values.push(0.1 * i as f64);
            }
        }
        let c = init_centroids(&values, 2).unwrap();
        assert_eq!(c, vec![0.0, 0.9]);
    }

    #[test]
    fn init_rejects_small_input() {
        let err = init_centroids(&[0.1, 0.2, 0.3], 2).unwrap_err();
        assert!(matches!(err, BucketingError::TooFewSamples { .. }));
    }

    #[test]
    fn init_pads_when_working_set_runs_dry() {
        // n = 2k removes up to three points per round, so the working set
        // empties before k rounds; the farthest-point padding must still
        // deliver k in-range centroids.
        let values = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        let c = init_centroids(&values, 5).unwrap();
        assert_eq!(c.len(), 5);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(c.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn fit_falls_back_to_equal_width_on_tiny_windows() {
        // Four values cannot seed five centroids; equal-width bins are
        // used and merged until the counts support the floor.
        let spec = fit(&[0.1, 0.2, 0.8, 0.9], &BucketingConfig::with_k(5));
        assert_eq!(spec.k(), 1);
        assert_eq!(spec.boundaries(), &[0.0, 1.0]);
    }

    #[test]
    fn fit_two_point_clusters() {
        let mut values = vec![0.3; 200];
        values.extend(vec![0.7; 200]);
        let spec = fit(&values, &BucketingConfig::with_k(2));
        assert_eq!(spec.k(), 2);
        let b = spec.boundaries();
        assert!((b[1] - 0.5).abs() < 1e-12, "boundaries = {b:?}");
        assert_eq!(spec.histogram(&values).unwrap(), vec![200, 200]);
    }

    #[test]
    fn fit_uniform_respects_floor() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let spec = fit(&values, &BucketingConfig::with_k(5));
        assert_eq!(spec.k(), 5);
        let counts = spec.histogram(&values).unwrap();
        assert!(counts.iter().all(|&c| c >= 5), "counts = {counts:?}");
    }

    #[test]
    fn fit_isolated_point_shrinks_k() {
        let mut values = vec![0.1; 999];
        values.push(0.9);
        let spec = fit(&values, &BucketingConfig::with_k(5));
        assert!(spec.k() < 5, "k = {}", spec.k());
        let counts = spec.histogram(&values).unwrap();
        assert!(counts.iter().all(|&c| c >= 5) || spec.k() == 1);
    }

    #[test]
    fn assign_boundary_conventions() {
        let spec = BucketSpec::from_boundaries(vec![0.0, 0.5, 1.0]);
        assert_eq!(spec.assign(0.25).unwrap(), 0);
        assert_eq!(spec.assign(0.5).unwrap(), 1);
        assert_eq!(spec.assign(1.0).unwrap(), 1);
        assert_eq!(spec.assign(0.0).unwrap(), 0);
        assert!(matches!(
            spec.assign(1.5),
            Err(BucketingError::OutOfRange { .. })
        ));
        assert!(matches!(
            spec.assign(-0.1),
            Err(BucketingError::OutOfRange { .. })
        ));
    }

    #[test]
    fn histogram_simple_and_empty() {
        let spec = BucketSpec::from_boundaries(vec![0.0, 0.5, 1.0]);
        assert_eq!(spec.histogram(&[0.1, 0.2, 0.9]).unwrap(), vec![2, 1]);
        assert_eq!(spec.histogram(&[]).unwrap(), vec![0, 0]);
    }

    #[test]
    fn histogram_matches_per_value_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let spec = fit(&values, &BucketingConfig::with_k(6));
        let counts = spec.histogram(&values).unwrap();
        let mut oracle = vec![0u64; spec.k()];
        for &v in &values {
            oracle[spec.assign(v).unwrap()] += 1;
        }
        assert_eq!(counts, oracle);
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(spec.histogram_sorted(&sorted), oracle);
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let values: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let cfg = BucketingConfig::with_k(4);
        assert_eq!(fit(&values, &cfg), fit(&values, &cfg));
    }

    #[test]
    fn fit_single_value() {
        let spec = fit(&[0.4], &BucketingConfig::with_k(5));
        assert_eq!(spec.k(), 1);
        assert_eq!(spec.histogram(&[0.4]).unwrap(), vec![1]);
    }

    proptest! {
        #[test]
        fn partition_covers_unit_interval(
            values in proptest::collection::vec(0.0..=1.0f64, 1..200),
            probes in proptest::collection::vec(0.0..=1.0f64, 1..50),
            k in 1usize..7,
        ) {
            let spec = fit(&values, &BucketingConfig::with_k(k));
            let counts = spec.histogram(&values).unwrap();
            prop_assert_eq!(counts.iter().sum::<u64>(), values.len() as u64);
            for p in probes {
                let bin = spec.assign(p).unwrap();
                prop_assert!(bin < spec.k());
            }
        }

        #[test]
        fn floor_holds_or_single_bin(
            values in proptest::collection::vec(0.0..=1.0f64, 1..300),
            k in 1usize..7,
        ) {
            let cfg = BucketingConfig::with_k(k);
            let spec = fit(&values, &cfg);
            let counts = spec.histogram(&values).unwrap();
            prop_assert!(
                spec.k() == 1 || counts.iter().all(|&c| c as f64 >= cfg.min_expected),
                "counts = {:?}", counts
            );
        }

        #[test]
        fn amplify_never_grows_largest_bin(
            values in proptest::collection::vec(0.0..=1.0f64, 20..200),
            k in 2usize..6,
        ) {
            let mut sorted = values;
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let Ok(init) = init_centroids(&sorted, k) else {
                return Ok(());
            };
            let centroids = dedup_sorted(init);
            let spec = BucketSpec::from_centroids(centroids.clone());
            let counts = spec.histogram_sorted(&sorted);
            let largest = counts
                .iter()
                .enumerate()
                .max_by_key(|&(j, &c)| (c, std::cmp::Reverse(j)))
                .map(|(j, _)| j)
                .unwrap();
            let membership = amplified_membership(&sorted, &centroids, &counts, 2.0);
            let new_count = membership.iter().filter(|&&m| m == largest).count() as u64;
            prop_assert!(
                new_count <= counts[largest],
                "largest bin grew: {} -> {}", counts[largest], new_count
            );
        }
    }
}
