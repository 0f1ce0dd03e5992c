//! Two-sided Mann-Whitney U test.
//!
//! Ties receive midranks. For `n1 * n2 <= 400` the null distribution of the
//! rank sum is computed exactly by dynamic programming over doubled midranks,
//! which stays exact in the presence of ties. Larger samples use the normal
//! approximation with tie-corrected variance, continuity correction and an
//! Edgeworth term built from the exact fourth cumulant of the permutation
//! distribution.

use statrs::function::erf::erfc;

/// Largest `n1 * n2` evaluated with the exact null distribution.
pub const EXACT_MAX_PRODUCT: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UTestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UTestResult {
    /// U of the first sample: rank sum minus `n1 (n1 + 1) / 2`.
    pub u_statistic: f64,
    pub p_value: f64,
    pub method: UTestMethod,
    /// Every observation shared one value, so the statistic has no spread.
    pub degenerate: bool,
}

/// Doubled midranks of the concatenation `x ++ y`, in input order.
fn doubled_midranks(x: &[f64], y: &[f64]) -> Vec<u64> {
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&a, &b| all[a].total_cmp(&all[b]));
    let mut ranks = vec![0u64; all.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && all[order[j]] == all[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share midrank ((i+1) + j) / 2
        let doubled = (i + 1 + j) as u64;
        for &k in &order[i..j] {
            ranks[k] = doubled;
        }
        i = j;
    }
    ranks
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Number of size-`k` subsets of `scores` reaching each total.
fn subset_sum_counts(scores: &[u64], k: usize) -> Vec<f64> {
    let max_sum: u64 = {
        let mut s = scores.to_vec();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s.iter().take(k).sum()
    };
    let width = max_sum as usize + 1;
    let mut dp = vec![0.0f64; (k + 1) * width];
    dp[0] = 1.0;
    for (taken, &score) in scores.iter().enumerate() {
        let s = score as usize;
        for c in (1..=k.min(taken + 1)).rev() {
            let (lo, hi) = dp.split_at_mut(c * width);
            let prev = &lo[(c - 1) * width..];
            let cur = &mut hi[..width];
            for total in (s..width).rev() {
                let add = prev[total - s];
                if add != 0.0 {
                    cur[total] += add;
                }
            }
        }
    }
    dp[k * width..].to_vec()
}

fn exact_p(ranks: &[u64], n1: usize, n2: usize) -> f64 {
    // enumerate the smaller group; its rank-sum tails mirror the other's
    let (k, observed): (usize, u64) = if n1 <= n2 {
        (n1, ranks[..n1].iter().sum())
    } else {
        (n2, ranks[n1..].iter().sum())
    };
    let counts = subset_sum_counts(ranks, k);
    let total: f64 = counts.iter().sum();
    let obs = observed as usize;
    let lower: f64 = counts[..=obs.min(counts.len() - 1)].iter().sum();
    let upper: f64 = if obs < counts.len() { counts[obs..].iter().sum() } else { 0.0 };
    (2.0 * lower.min(upper) / total).min(1.0)
}

/// Second and fourth cumulants of the sum of `n` values drawn without
/// replacement from `pop`.
fn sample_sum_cumulants(pop: &[f64], n: usize) -> (f64, f64) {
    let big_n = pop.len() as f64;
    let n = n as f64;
    let mean = pop.iter().sum::<f64>() / big_n;
    let s2: f64 = pop.iter().map(|v| (v - mean).powi(2)).sum();
    let s4: f64 = pop.iter().map(|v| (v - mean).powi(4)).sum();
    let p1 = n / big_n;
    let p2 = if big_n > 1.0 { p1 * (n - 1.0) / (big_n - 1.0) } else { 0.0 };
    let p3 = if big_n > 2.0 { p2 * (n - 2.0) / (big_n - 2.0) } else { 0.0 };
    let p4 = if big_n > 3.0 { p3 * (n - 3.0) / (big_n - 3.0) } else { 0.0 };
    let m2 = s2 * (p1 - p2);
    let m4 = p1 * s4 - 4.0 * p2 * s4 + 3.0 * p2 * (s2 * s2 - s4) + 6.0 * p3 * (2.0 * s4 - s2 * s2)
        + p4 * (3.0 * s2 * s2 - 6.0 * s4);
    (m2, m4 - 3.0 * m2 * m2)
}

fn approx_p(ranks: &[u64], n1: usize, u: f64) -> f64 {
    let midranks: Vec<f64> = ranks.iter().map(|&r| r as f64 / 2.0).collect();
    let (var, k4) = sample_sum_cumulants(&midranks, n1);
    if var <= 0.0 {
        return 1.0;
    }
    let n2 = ranks.len() - n1;
    let mu = (n1 * n2) as f64 / 2.0;
    let sd = var.sqrt();
    let z = ((u - mu).abs() - 0.5).max(0.0) / sd;
    let gamma2 = k4 / (var * var);
    let tail = normal_sf(z) + normal_pdf(z) * gamma2 / 24.0 * (z.powi(3) - 3.0 * z);
    (2.0 * tail).clamp(0.0, 1.0)
}

/// Two-sided Mann-Whitney U test of `x` against `y`.
///
/// # Panics
/// If either sample is empty or contains NaN.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> UTestResult {
    assert!(!x.is_empty() && !y.is_empty(), "mann_whitney_u needs two nonempty samples");
    assert!(x.iter().chain(y).all(|v| !v.is_nan()), "mann_whitney_u got NaN");
    let (n1, n2) = (x.len(), y.len());
    let ranks = doubled_midranks(x, y);
    let r1: u64 = ranks[..n1].iter().sum();
    let u = r1 as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    let first = x[0];
    let degenerate = x.iter().chain(y).all(|&v| v == first);
    if degenerate {
        return UTestResult { u_statistic: u, p_value: 1.0, method: UTestMethod::Exact, degenerate };
    }
    let (p_value, method) = if n1 * n2 <= EXACT_MAX_PRODUCT {
        (exact_p(&ranks, n1, n2), UTestMethod::Exact)
    } else {
        (approx_p(&ranks, n1, u), UTestMethod::NormalApprox)
    };
    UTestResult { u_statistic: u, p_value, method, degenerate }
}

/// Two-sided p-value from the (Edgeworth-corrected) normal approximation,
/// whatever the sample sizes.
pub fn mann_whitney_u_approx(x: &[f64], y: &[f64]) -> f64 {
    let ranks = doubled_midranks(x, y);
    let r1: u64 = ranks[..x.len()].iter().sum();
    let u = r1 as f64 / 2.0 - (x.len() * (x.len() + 1)) as f64 / 2.0;
    approx_p(&ranks, x.len(), u)
}

/// Asterisk markers for significance levels 0.05 / 0.01 / 0.001.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Brute-force oracle: enumerate every assignment of `n1` of the pooled
    /// observations to the first group.
    fn enumerate_p(x: &[f64], y: &[f64]) -> f64 {
        let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
        let n = pooled.len();
        let n1 = x.len();
        let rank = |v: f64| {
            let less = pooled.iter().filter(|&&w| w < v).count() as f64;
            let eq = pooled.iter().filter(|&&w| w == v).count() as f64;
            less + (eq + 1.0) / 2.0
        };
        let ranks: Vec<f64> = pooled.iter().map(|&v| rank(v)).collect();
        let obs: f64 = ranks[..n1].iter().sum();
        let (mut lo, mut hi, mut total) = (0u64, 0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            let s: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            total += 1;
            if s <= obs + 1e-9 {
                lo += 1;
            }
            if s >= obs - 1e-9 {
                hi += 1;
            }
        }
        (2.0 * lo.min(hi) as f64 / total as f64).min(1.0)
    }

    #[test]
    fn separated_triples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert_eq!(r.u_statistic, 0.0);
        assert_eq!(r.method, UTestMethod::Exact);
        assert!((r.p_value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_samples() {
        let x = [0.31, 0.35, 0.29, 0.40, 0.33];
        assert!(mann_whitney_u(&x, &x).p_value >= 0.99);
        let r = mann_whitney_u(&[0.5; 4], &[0.5; 3]);
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n1 = rng.random_range(1..=7);
            let n2 = rng.random_range(1..=7);
            let x: Vec<f64> = (0..n1).map(|_| rng.random_range(0..5) as f64).collect();
            let y: Vec<f64> = (0..n2).map(|_| rng.random_range(0..5) as f64).collect();
            let r = mann_whitney_u(&x, &y);
            if r.degenerate {
                continue;
            }
            assert!((r.p_value - enumerate_p(&x, &y)).abs() < 1e-12, "{x:?} {y:?}");
        }
    }

    #[test]
    fn approximation_tracks_exact_at_n8() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let shift = rng.random_range(0.0..2.0);
            let x: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..8).map(|_| rng.random::<f64>() + shift * 0.5).collect();
            let exact = mann_whitney_u(&x, &y);
            assert_eq!(exact.method, UTestMethod::Exact);
            worst = worst.max((exact.p_value - mann_whitney_u_approx(&x, &y)).abs());
        }
        assert!(worst <= 0.01, "worst deviation {worst}");
    }

    #[test]
    fn cumulants_match_no_tie_closed_form() {
        for (n1, n2) in [(8usize, 8usize), (3, 5), (10, 4), (30, 41)] {
            let n = n1 + n2;
            let pop: Vec<f64> = (1..=n).map(|v| v as f64).collect();
            let (var, k4) = sample_sum_cumulants(&pop, n1);
            let (a, b) = (n1 as f64, n2 as f64);
            let var_ref = a * b * (n as f64 + 1.0) / 12.0;
            let k4_ref = -a * b * (n as f64 + 1.0) * (a * a + b * b + a * b + a + b) / 120.0;
            assert!((var - var_ref).abs() < 1e-9 * var_ref);
            assert!((k4 - k4_ref).abs() < 1e-8 * k4_ref.abs());
        }
    }

    #[test]
    fn large_samples_use_approximation() {
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..30).map(|i| i as f64 + 5.5).collect();
        let r = mann_whitney_u(&x, &y);
        assert_eq!(r.method, UTestMethod::NormalApprox);
        assert!(r.p_value > 0.0 && r.p_value < 0.2);
    }

    #[test]
    fn stars() {
        assert_eq!(significance_stars(0.0004), "***");
        assert_eq!(significance_stars(0.004), "**");
        assert_eq!(significance_stars(0.04), "*");
        assert_eq!(significance_stars(0.4), "");
    }

    #[test]
    fn mean_std_single_value() {
        assert_eq!(mean_std(&[0.3]), (0.3, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15 && (s - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn swapping_samples_mirrors_u(x in prop::collection::vec(0u8..20, 1..30), y in prop::collection::vec(0u8..20, 1..30)) {
            let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
            let a = mann_whitney_u(&xf, &yf);
            let b = mann_whitney_u(&yf, &xf);
            prop_assert!((a.u_statistic + b.u_statistic - (x.len() * y.len()) as f64).abs() < 1e-9);
            prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.p_value));
        }

        #[test]
        fn monotone_transform_invariance(x in prop::collection::vec(-5.0f64..5.0, 1..25), y in prop::collection::vec(-5.0f64..5.0, 1..25)) {
            let a = mann_whitney_u(&x, &y);
            let tx: Vec<f64> = x.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            let ty: Vec<f64> = y.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            let b = mann_whitney_u(&tx, &ty);
            prop_assert_eq!(a.u_statistic, b.u_statistic);
            prop_assert_eq!(a.p_value, b.p_value);
        }
    }
}
