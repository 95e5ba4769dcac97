//! Pearson's Chi-square test over 2-row contingency tables.
//!
//! The tables here have one row per stream window and one column per
//! PU-index bucket (the last column usually holds misclassified counts).
//! The statistic uses the identity `chi2 = sum(O^2 / E) - N`, which is
//! algebraically equal to the classic `sum((O - E)^2 / E)` form, and the
//! p-value is the upper tail of the chi-square distribution evaluated
//! through the regularized incomplete gamma function.
//!
//! Validity of the test rests on expected counts: the bucketing layer
//! guarantees expected counts of at least 5. Small *observed* counts are
//! only a soft concern; [`ContingencyTable::has_low_observed`] lets callers
//! surface them as a warning instead of an error.

use thiserror::Error;

/// Errors produced by the chi-square layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Chi2Error {
    /// A row or column of the table sums to zero, so expected frequencies
    /// are undefined. The caller must merge or skip the degenerate table.
    #[error("row or column {index} of the contingency table sums to zero")]
    ZeroMarginal {
        /// Index of the offending row or column.
        index: usize,
    },
    /// The table has fewer than two columns or a zero grand total.
    #[error("contingency table is degenerate: {reason}")]
    Degenerate { reason: &'static str },
}

/// Observed counts for two windows over `k` buckets: 2 rows, `k` columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: [Vec<u64>; 2],
}

impl ContingencyTable {
    /// Builds a table from two rows of observed counts.
    ///
    /// Both rows must have the same length and at least two columns.
    pub fn new(first: Vec<u64>, second: Vec<u64>) -> Result<Self, Chi2Error> {
        if first.len() != second.len() {
            return Err(Chi2Error::Degenerate {
                reason: "rows differ in length",
            });
        }
        if first.len() < 2 {
            return Err(Chi2Error::Degenerate {
                reason: "fewer than two columns",
            });
        }
        Ok(Self {
            rows: [first, second],
        })
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.rows[0].len()
    }

    /// Observed count at `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.rows[row][col]
    }

    /// Row sums `n_i`.
    pub fn row_sums(&self) -> [u64; 2] {
        [
            self.rows[0].iter().sum(),
            self.rows[1].iter().sum(),
        ]
    }

    /// Column sums `n_j`.
    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cols())
            .map(|j| self.rows[0][j] + self.rows[1][j])
            .collect()
    }

    /// Grand total `N`.
    pub fn total(&self) -> u64 {
        self.rows[0].iter().sum::<u64>() + self.rows[1].iter().sum::<u64>()
    }

    /// True when any observed cell is below the classical soft threshold
    /// of 50. This is a warning condition, never an error.
    pub fn has_low_observed(&self) -> bool {
        self.rows.iter().any(|r| r.iter().any(|&o| o < 50))
    }
}

/// Outcome of a chi-square test.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareResult {
    /// The chi-square statistic, non-negative.
    pub statistic: f64,
    /// Degrees of freedom, `(rows - 1) * (cols - 1)`.
    pub dof: usize,
    /// Upper-tail p-value in `[0, 1]`.
    pub p_value: f64,
}

/// Expected frequencies `E_ij = n_i * n_j / N`.
///
/// Fails with [`Chi2Error::ZeroMarginal`] when a row or column sums to
/// zero; the statistic would divide by zero there and the caller has to
/// merge or drop that margin first.
pub fn expected_frequencies(table: &ContingencyTable) -> Result<[Vec<f64>; 2], Chi2Error> {
    let n = table.total();
    if n == 0 {
        return Err(Chi2Error::Degenerate {
            reason: "grand total is zero",
        });
    }
    let row_sums = table.row_sums();
    if let Some(i) = row_sums.iter().position(|&s| s == 0) {
        return Err(Chi2Error::ZeroMarginal { index: i });
    }
    let col_sums = table.col_sums();
    if let Some(j) = col_sums.iter().position(|&s| s == 0) {
        return Err(Chi2Error::ZeroMarginal { index: j });
    }
    let n = n as f64;
    let expected = [0, 1].map(|i| {
        col_sums
            .iter()
            .map(|&cj| row_sums[i] as f64 * cj as f64 / n)
            .collect()
    });
    Ok(expected)
}

/// Chi-square statistic and degrees of freedom via `sum(O^2 / E) - N`.
pub fn chi_square_statistic(table: &ContingencyTable) -> Result<(f64, usize), Chi2Error> {
    let expected = expected_frequencies(table)?;
    let mut acc = 0.0;
    for (i, row) in expected.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            let o = table.get(i, j) as f64;
            acc += o * o / e;
        }
    }
    let statistic = (acc - table.total() as f64).max(0.0);
    Ok((statistic, table.cols() - 1))
}

/// Upper-tail p-value of the chi-square distribution:
/// `p = 1 - P(dof / 2, statistic / 2)` with `P` the regularized lower
/// incomplete gamma function. Saturates at 0 and 1.
pub fn chi_square_p_value(statistic: f64, dof: usize) -> f64 {
    debug_assert!(statistic >= 0.0);
    debug_assert!(dof >= 1);
    if statistic <= 0.0 {
        return 1.0;
    }
    let p = 1.0 - gamma_p(dof as f64 / 2.0, statistic / 2.0);
    p.clamp(0.0, 1.0)
}

/// Full test: statistic, dof, and p-value for one table.
pub fn chi_square_test(table: &ContingencyTable) -> Result<ChiSquareResult, Chi2Error> {
    let (statistic, dof) = chi_square_statistic(table)?;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_p_value(statistic, dof),
    })
}

const GAMMA_REL_TOL: f64 = 1e-12;
const GAMMA_MAX_ITER: usize = 1000;

/// Natural log of the gamma function (Lanczos approximation, g = 5).
pub fn ln_gamma(x: f64) -> f64 {
    // Coefficients from the standard 6-term Lanczos fit; accurate to
    // better than 2e-10 relative for x > 0.
    const COEFFS: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_9e-2,
        -0.539_523_938_495_3e-5,
    ];
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000_000_000_190_015;
    for (j, &c) in COEFFS.iter().enumerate() {
        ser += c / (x + 1.0 + j as f64);
    }
    -tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
///
/// Series expansion for `x < a + 1`, continued fraction otherwise.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..=GAMMA_MAX_ITER {
        term *= x / (a + n as f64);
        sum += term;
        if term.abs() < sum.abs() * GAMMA_REL_TOL {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    // Modified Lentz's method for the continued fraction of Q(a, x).
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_REL_TOL {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(first: &[u64], second: &[u64]) -> ContingencyTable {
        ContingencyTable::new(first.to_vec(), second.to_vec()).unwrap()
    }

    /// Classic form of the statistic, used as an independent oracle.
    fn oracle_statistic(t: &ContingencyTable) -> f64 {
        let expected = expected_frequencies(t).unwrap();
        let mut acc = 0.0;
        for (i, row) in expected.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                let d = t.get(i, j) as f64 - e;
                acc += d * d / e;
            }
        }
        acc
    }

    #[test]
    fn expected_frequencies_direct() {
        let e = expected_frequencies(&table(&[10, 20], &[30, 40])).unwrap();
        assert_eq!(e[0], vec![12.0, 18.0]);
        assert_eq!(e[1], vec![28.0, 42.0]);
    }

    #[test]
    fn expected_frequencies_uniform_is_fixed_point() {
        let e = expected_frequencies(&table(&[5, 5], &[5, 5])).unwrap();
        assert_eq!(e[0], vec![5.0, 5.0]);
        assert_eq!(e[1], vec![5.0, 5.0]);
    }

    #[test]
    fn expected_frequencies_symmetric_marginals() {
        let e = expected_frequencies(&table(&[50, 0], &[0, 50])).unwrap();
        assert_eq!(e[0], vec![25.0, 25.0]);
        assert_eq!(e[1], vec![25.0, 25.0]);
    }

    #[test]
    fn zero_marginal_is_refused() {
        let err = expected_frequencies(&table(&[10, 0], &[20, 0])).unwrap_err();
        assert_eq!(err, Chi2Error::ZeroMarginal { index: 1 });
        let err = expected_frequencies(&table(&[0, 0], &[20, 10])).unwrap_err();
        assert_eq!(err, Chi2Error::ZeroMarginal { index: 0 });
    }

    #[test]
    fn statistic_zero_when_observed_equals_expected() {
        let (s, dof) = chi_square_statistic(&table(&[5, 5], &[5, 5])).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(dof, 1);
    }

    #[test]
    fn statistic_hand_computed() {
        // E = 15 in every cell, so chi2 = 4 * 25 / 15 = 20/3.
        let (s, dof) = chi_square_statistic(&table(&[10, 20], &[20, 10])).unwrap();
        assert!((s - 20.0 / 3.0).abs() < 1e-9, "s = {s}");
        assert_eq!(dof, 1);
    }

    #[test]
    fn statistic_matches_classic_form_on_random_tables() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let cols = rng.gen_range(2..=8);
            let first: Vec<u64> = (0..cols).map(|_| rng.gen_range(1..200)).collect();
            let second: Vec<u64> = (0..cols).map(|_| rng.gen_range(1..200)).collect();
            let t = table(&first, &second);
            let (s, _) = chi_square_statistic(&t).unwrap();
            let oracle = oracle_statistic(&t);
            let rel = (s - oracle).abs() / oracle.max(1.0);
            assert!(rel < 1e-9, "identity violated: {s} vs {oracle}");
        }
    }

    #[test]
    fn p_value_boundaries() {
        assert_eq!(chi_square_p_value(0.0, 1), 1.0);
        assert_eq!(chi_square_p_value(0.0, 17), 1.0);
        assert!(chi_square_p_value(1e6, 1) < 1e-12);
    }

    #[test]
    fn p_value_critical_points() {
        assert!((chi_square_p_value(3.841, 1) - 0.05).abs() < 1e-3);
        assert!((chi_square_p_value(15.09, 5) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn full_test_on_independent_table() {
        let r = chi_square_test(&table(&[50, 50], &[50, 50])).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn low_observed_flag() {
        assert!(table(&[49, 100], &[100, 100]).has_low_observed());
        assert!(!table(&[50, 100], &[100, 100]).has_low_observed());
    }

    proptest! {
        #[test]
        fn p_value_monotone_in_statistic(
            s1 in 0.0..80.0f64,
            delta in 0.0..20.0f64,
            dof in 1usize..30,
        ) {
            let p1 = chi_square_p_value(s1, dof);
            let p2 = chi_square_p_value(s1 + delta, dof);
            prop_assert!(p2 <= p1 + 1e-15);
        }

        #[test]
        fn statistic_scales_with_marginals(
            first in proptest::collection::vec(1u64..50, 2..6),
            second in proptest::collection::vec(1u64..50, 2..6),
            c in 2u64..6,
        ) {
            let cols = first.len().min(second.len());
            let t = table(&first[..cols], &second[..cols]);
            let scaled = table(
                &first[..cols].iter().map(|&o| o * c).collect::<Vec<_>>(),
                &second[..cols].iter().map(|&o| o * c).collect::<Vec<_>>(),
            );
            let (s, _) = chi_square_statistic(&t).unwrap();
            let (sc, _) = chi_square_statistic(&scaled).unwrap();
            let rel = (sc - c as f64 * s).abs() / (c as f64 * s).max(1.0);
            prop_assert!(rel < 1e-9);
        }

        #[test]
        fn p_value_in_unit_interval(s in 0.0..500.0f64, dof in 1usize..60) {
            let p = chi_square_p_value(s, dof);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
