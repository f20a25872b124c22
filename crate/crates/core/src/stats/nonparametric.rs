//! Two-sample Kolmogorov-Smirnov and Mann-Whitney U tests.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::check_finite;
use super::special::{erfc, kolmogorov_sf};
use crate::error::{Error, Result};

/// Mann-Whitney inputs with `n1 * n2` at or below this use the exact
/// permutation distribution; larger ones use the normal approximation.
pub const MWU_EXACT_MAX_PAIRS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "KS")]
    KolmogorovSmirnov,
    #[serde(rename = "MWU")]
    MannWhitney,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Asymptotic,
    NormalApproximation,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleTestResult {
    /// KS: D in [0, 1]. MWU: U for the first sample, in [0, n1·n2].
    pub statistic: f64,
    pub p_two_tailed: f64,
    pub test_kind: TestKind,
    pub method: PValueMethod,
    pub n1: usize,
    pub n2: usize,
}

fn check_samples(test: &str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Validation(format!(
            "{test}: each sample needs at least 2 values (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    check_finite(test, a)?;
    check_finite(test, b)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    v
}

/// Two-sample KS test. D is the largest ECDF gap; p is the asymptotic
/// Kolmogorov tail at `sqrt(n1·n2/(n1+n2))·D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TwoSampleTestResult> {
    check_samples("ks_two_sample", a, b)?;
    let (sa, sb) = (sorted(a), sorted(b));
    let (n1, n2) = (sa.len(), sb.len());
    // Track n2·i − n1·j so D = max|…| / (n1·n2) is a single rounding.
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: i64 = 0;
    while i < n1 && j < n2 {
        let v = sa[i].min(sb[j]);
        while i < n1 && sa[i] == v {
            i += 1;
        }
        while j < n2 && sb[j] == v {
            j += 1;
        }
        let gap = (n2 * i) as i64 - (n1 * j) as i64;
        best = best.max(gap.abs());
    }
    let d = best as f64 / (n1 * n2) as f64;
    let en = (n1 * n2) as f64 / (n1 + n2) as f64;
    Ok(TwoSampleTestResult {
        statistic: d,
        p_two_tailed: kolmogorov_sf(en.sqrt() * d),
        test_kind: TestKind::KolmogorovSmirnov,
        method: PValueMethod::Asymptotic,
        n1,
        n2,
    })
}

/// Pooled ranking shared by both MWU paths.
struct Ranked {
    /// Doubled midranks of the first sample's values, summed (an integer).
    doubled_rank_sum_a: u64,
    /// Doubled midranks of every pooled observation.
    doubled_ranks: Vec<u64>,
    /// Sizes of each tie group.
    tie_sizes: Vec<usize>,
}

fn rank_pooled(a: &[f64], b: &[f64]) -> Ranked {
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));
    let total = pooled.len();
    let mut doubled_ranks = Vec::with_capacity(total);
    let mut tie_sizes = Vec::new();
    let mut sum_a = 0u64;
    let mut start = 0;
    while start < total {
        let mut end = start;
        while end + 1 < total && pooled[end + 1].0 == pooled[start].0 {
            end += 1;
        }
        // ranks start..=end (1-based start+1..end+1); doubled midrank = (start+1)+(end+1)
        let doubled = (start + end + 2) as u64;
        for item in &pooled[start..=end] {
            doubled_ranks.push(doubled);
            if item.1 {
                sum_a += doubled;
            }
        }
        tie_sizes.push(end - start + 1);
        start = end + 1;
    }
    Ranked {
        doubled_rank_sum_a: sum_a,
        doubled_ranks,
        tie_sizes,
    }
}

fn u_statistic(ranked: &Ranked, n1: usize) -> f64 {
    (ranked.doubled_rank_sum_a as f64 - (n1 * (n1 + 1)) as f64) / 2.0
}

fn check_not_degenerate(ranked: &Ranked) -> Result<()> {
    if ranked.tie_sizes.len() == 1 {
        return Err(Error::Degenerate(
            "mann_whitney_u: all values are identical across both samples".into(),
        ));
    }
    Ok(())
}

/// Mann-Whitney U for the first sample, with a two-tailed p-value.
///
/// Uses [`mann_whitney_u_exact`] when `n1·n2 <= 400` and
/// [`mann_whitney_u_normal`] otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TwoSampleTestResult> {
    if a.len() * b.len() <= MWU_EXACT_MAX_PAIRS {
        mann_whitney_u_exact(a, b)
    } else {
        mann_whitney_u_normal(a, b)
    }
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction.
pub fn mann_whitney_u_normal(a: &[f64], b: &[f64]) -> Result<TwoSampleTestResult> {
    check_samples("mann_whitney_u", a, b)?;
    let ranked = rank_pooled(a, b);
    check_not_degenerate(&ranked)?;
    let (n1, n2) = (a.len(), b.len());
    let u = u_statistic(&ranked, n1);
    let n = (n1 + n2) as f64;
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let ties: f64 = ranked
        .tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = n1f * n2f / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let mean = n1f * n2f / 2.0;
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(TwoSampleTestResult {
        statistic: u,
        p_two_tailed: p,
        test_kind: TestKind::MannWhitney,
        method: PValueMethod::NormalApproximation,
        n1,
        n2,
    })
}

/// Exact p from the permutation distribution of the rank sum, conditional on
/// the observed tie pattern: `min(1, 2·min(P(U <= u), P(U >= u)))`.
pub fn mann_whitney_u_exact(a: &[f64], b: &[f64]) -> Result<TwoSampleTestResult> {
    check_samples("mann_whitney_u", a, b)?;
    let ranked = rank_pooled(a, b);
    check_not_degenerate(&ranked)?;
    let (n1, n2) = (a.len(), b.len());
    let u = u_statistic(&ranked, n1);

    // Count subsets of the smaller group's size by doubled-rank sum.
    let total_doubled: u64 = ranked.doubled_ranks.iter().sum();
    let (k, observed) = if n1 <= n2 {
        (n1, ranked.doubled_rank_sum_a)
    } else {
        (n2, total_doubled - ranked.doubled_rank_sum_a)
    };
    let max_sum = total_doubled as usize;
    // ways[c][s]: number of c-subsets with doubled-rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; k + 1];
    ways[0][0] = 1.0;
    let mut reach = 0usize;
    for (taken, &r) in ranked.doubled_ranks.iter().enumerate() {
        let r = r as usize;
        reach += r;
        for c in (1..=k.min(taken + 1)).rev() {
            let (lower, upper) = ways.split_at_mut(c);
            let prev = &lower[c - 1];
            let cur = &mut upper[0];
            for s in (r..=reach).rev() {
                let add = prev[s - r];
                if add != 0.0 {
                    cur[s] += add;
                }
            }
        }
    }
    let dist = &ways[k];
    let total: f64 = dist.iter().sum();
    let observed = observed as usize;
    let lo: f64 = dist[..=observed].iter().sum();
    let hi: f64 = dist[observed..].iter().sum();
    let p = (2.0 * lo.min(hi) / total).min(1.0);
    Ok(TwoSampleTestResult {
        statistic: u,
        p_two_tailed: p,
        test_kind: TestKind::MannWhitney,
        method: PValueMethod::Exact,
        n1,
        n2,
    })
}
