//! Wilcoxon signed-rank test.
//!
//! Zero differences are discarded and tied magnitudes share the average of
//! their ranks. Average ranks are multiples of 1/2, so the exact null
//! distribution is built over doubled ranks, which are integers: the count of
//! sign assignments reaching each doubled positive-rank sum is a subset-sum
//! table, equivalent to enumerating all `2^m` assignments.

use super::dist::normal_cdf;
use super::{check_finite, StatsError, TestMethod, TestResult};

/// Largest number of nonzero differences handled by the exact distribution
/// under [`WilcoxonMethod::Auto`].
pub const EXACT_MAX_PAIRS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WilcoxonMethod {
    /// Exact up to [`EXACT_MAX_PAIRS`], normal approximation above.
    #[default]
    Auto,
    Exact,
    Normal,
}

/// Signed average ranks of the nonzero differences, in input order.
pub fn signed_ranks(d: &[f64]) -> Vec<f64> {
    let nz: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let mut order: Vec<usize> = (0..nz.len()).collect();
    order.sort_by(|&a, &b| nz[a].abs().total_cmp(&nz[b].abs()));
    let mut ranks = vec![0.0; nz.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && nz[order[j + 1]].abs() == nz[order[i]].abs() {
            j += 1;
        }
        // positions i..=j share ranks i+1 ..= j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg.copysign(nz[k]);
        }
        i = j + 1;
    }
    ranks
}

/// `counts[s]` is the number of sign assignments whose positive doubled
/// ranks sum to `s`.
pub fn signed_rank_sum_counts(doubled_ranks: &[u64]) -> Vec<u64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn exact_p(ranks: &[f64], w_plus: f64, two_sided: bool) -> f64 {
    let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r.abs()).round() as u64).collect();
    let counts = signed_rank_sum_counts(&doubled);
    let w2 = (2.0 * w_plus).round() as usize;
    let all: u64 = counts.iter().sum();
    let ge: u64 = counts[w2..].iter().sum();
    let le: u64 = counts[..=w2].iter().sum();
    let (ge, le) = (ge as f64 / all as f64, le as f64 / all as f64);
    if two_sided {
        (2.0 * ge.min(le)).min(1.0)
    } else {
        ge
    }
}

fn normal_p(ranks: &[f64], w_plus: f64, two_sided: bool) -> f64 {
    let m = ranks.len() as f64;
    let mean = m * (m + 1.0) / 4.0;
    let mut abs: Vec<f64> = ranks.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < abs.len() {
        let j = abs[i..].iter().take_while(|v| **v == abs[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let diff = w_plus - mean;
    if two_sided {
        let z = (diff.abs() - 0.5).max(0.0) / sd;
        (2.0 * (1.0 - normal_cdf(z))).clamp(0.0, 1.0)
    } else {
        let z = (diff - 0.5) / sd;
        (1.0 - normal_cdf(z)).clamp(0.0, 1.0)
    }
}

/// Signed-rank test of `x - y` having zero median.
///
/// The statistic is `W⁺`, the sum of ranks of positive differences. The
/// one-sided variant tests the alternative `x > y`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], two_sided: bool) -> Result<TestResult, StatsError> {
    wilcoxon_signed_rank_with(x, y, two_sided, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    two_sided: bool,
    method: WilcoxonMethod,
) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    check_finite(x)?;
    check_finite(y)?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let ranks = signed_ranks(&d);
    if ranks.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let w_plus: f64 = ranks.iter().filter(|r| **r > 0.0).sum();
    let exact = match method {
        WilcoxonMethod::Auto => ranks.len() <= EXACT_MAX_PAIRS,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    let (p_value, method) = if exact {
        (exact_p(&ranks, w_plus, two_sided), TestMethod::WilcoxonExact)
    } else {
        (normal_p(&ranks, w_plus, two_sided), TestMethod::WilcoxonNormal)
    };
    Ok(TestResult {
        statistic: w_plus,
        p_value,
        n_effective: ranks.len(),
        dof: None,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_three() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0; 3], true).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert_eq!(r.p_value, 0.25);
        assert_eq!(r.method, TestMethod::WilcoxonExact);
        let one = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0; 3], false).unwrap();
        assert_eq!(one.p_value, 0.125);
    }

    #[test]
    fn zero_discard_and_ties() {
        let r = wilcoxon_signed_rank(&[0.0, 1.0, -1.0], &[0.0; 3], true).unwrap();
        assert_eq!(r.n_effective, 2);
        assert_eq!(r.statistic, 1.5);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(
            wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0], true).unwrap_err(),
            StatsError::AllZeroDifferences
        );
    }

    #[test]
    fn average_ranks() {
        assert_eq!(signed_ranks(&[3.0, -1.0, 0.0, 1.0, -5.0]), vec![3.0, -1.5, 1.5, -4.0]);
    }

    #[test]
    fn distribution_counts() {
        // Ranks 1..3 doubled: sums over subsets of {2, 4, 6}.
        let c = signed_rank_sum_counts(&[2, 4, 6]);
        assert_eq!(c.iter().sum::<u64>(), 8);
        assert_eq!((c[0], c[6], c[12]), (1, 2, 1));
    }

    #[test]
    fn normal_path_is_used_above_cutoff() {
        let x: Vec<f64> = (1..=20).map(f64::from).collect();
        let r = wilcoxon_signed_rank(&x, &[0.0; 20], true).unwrap();
        assert_eq!(r.method, TestMethod::WilcoxonNormal);
        assert!(r.p_value < 1e-3);
    }
}
