//! Two-sided Mann-Whitney U test.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest group size for which the p-value is computed by exact enumeration.
pub const EXACT_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannWhitney {
    /// U statistic of the first sample: pairs with a > b, ties counted 1/2.
    pub u: f64,
    pub p_two_sided: f64,
    pub exact: bool,
}

/// Midranks (1-based) of the pooled values, plus the tie group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::param("sample", "NaN in sample"));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let mean = (n1 * n2) as f64 / 2.0;

    if n1.max(n2) <= EXACT_MAX_N {
        let p = exact_p(&ranks, n1, (u - mean).abs());
        return Ok(MannWhitney { u, p_two_sided: p, exact: true });
    }

    let n = (n1 + n2) as f64;
    let tie_sum: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - std.cdf(z))).min(1.0)
    };
    Ok(MannWhitney { u, p_two_sided: p, exact: false })
}

/// Fraction of group assignments whose U deviates from the mean at least
/// as much as observed.
fn exact_p(ranks: &[f64], n1: usize, observed_dev: f64) -> f64 {
    let n = ranks.len();
    let mean = (n1 * (n - n1)) as f64 / 2.0;
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    fn rec(start: usize, left: usize, sum: f64, ranks: &[f64], visit: &mut dyn FnMut(f64)) {
        if left == 0 {
            visit(sum);
            return;
        }
        for i in start..=ranks.len() - left {
            rec(i + 1, left - 1, sum + ranks[i], ranks, visit);
        }
    }
    let mut visit = |rank_sum: f64| {
        total += 1;
        if (rank_sum - offset - mean).abs() >= observed_dev - 1e-9 {
            hits += 1;
        }
    };
    rec(0, n1, 0.0, ranks, &mut visit);
    hits as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_u(a: &[f64], b: &[f64]) -> f64 {
        let mut u = 0.0;
        for x in a {
            for y in b {
                if x > y {
                    u += 1.0;
                } else if x == y {
                    u += 0.5;
                }
            }
        }
        u
    }

    #[test]
    fn complete_separation() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.exact);
        // 2 of the 20 assignments are this extreme
        assert!((r.p_two_sided - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_samples() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.u, 12.5);
        assert!((r.p_two_sided - 1.0).abs() < 1e-12);
        let big: Vec<f64> = (0..20).map(|i| (i % 7) as f64).collect();
        let r = mann_whitney_u(&big, &big).unwrap();
        assert!(!r.exact);
        assert!(r.p_two_sided > 0.99);
    }

    #[test]
    fn matches_pair_counting_with_ties() {
        let a = [1.0, 2.0, 2.0, 5.0, 7.0];
        let b = [2.0, 3.0, 5.0, 5.0, 0.5];
        assert_eq!(mann_whitney_u(&a, &b).unwrap().u, brute_u(&a, &b));
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(mann_whitney_u(&[], &[1.0]), Err(Error::EmptySample)));
    }

    #[test]
    fn normal_approximation_is_close_to_exact_at_the_boundary() {
        let a: Vec<f64> = (0..8).map(|i| i as f64 * 1.3).collect();
        let b: Vec<f64> = (0..8).map(|i| i as f64 * 1.1 + 2.05).collect();
        let exact = mann_whitney_u(&a, &b).unwrap();
        let mut a9 = a.clone();
        a9.push(4.77);
        let approx = mann_whitney_u(&a9, &b).unwrap();
        assert!(exact.exact && !approx.exact);
        assert!((exact.p_two_sided - approx.p_two_sided).abs() < 0.15);
    }
}
