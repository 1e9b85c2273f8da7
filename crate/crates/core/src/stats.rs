//! Paired two-tailed Wilcoxon signed-rank test.
//!
//! Zero differences are discarded before ranking. Tied magnitudes share
//! their average rank. Up to [`EXACT_MAX_N`] non-zero pairs the p-value is
//! exact: the null distribution of `W+` is counted over all `2^n` sign
//! assignments of the realized ranks. Above that the normal approximation is
//! used, with tie and continuity corrections.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// Pairs left after removing zero differences.
    pub n_effective: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W+, W-)`
    pub statistic: f64,
    pub p_two_tailed: f64,
    pub significant_at_05: bool,
    pub method: PValueMethod,
}

impl WilcoxonResult {
    pub fn is_significant(&self, alpha: f64) -> bool {
        self.p_two_tailed < alpha
    }
}

/// Average ranks (1-based) of `values`; ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 2) as f64 / 2.0;
        for &i in &order[start..=end] {
            ranks[i] = rank;
        }
        start = end + 1;
    }
    ranks
}

pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("paired samples are empty".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }

    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|&d| d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n_effective: 0,
            w_plus: 0.0,
            w_minus: 0.0,
            statistic: 0.0,
            p_two_tailed: 1.0,
            significant_at_05: false,
            method: PValueMethod::Exact,
        });
    }

    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let mut w_plus = 0.0;
    let mut w_minus = 0.0;
    for (d, r) in diffs.iter().zip(&ranks) {
        if *d > 0.0 {
            w_plus += r;
        } else {
            w_minus += r;
        }
    }
    let statistic = w_plus.min(w_minus);

    let (p, method) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, statistic), PValueMethod::Exact)
    } else {
        (normal_p(&ranks, w_plus), PValueMethod::Normal)
    };
    let p = p.clamp(f64::MIN_POSITIVE, 1.0);
    Ok(WilcoxonResult {
        n_effective: n,
        w_plus,
        w_minus,
        statistic,
        p_two_tailed: p,
        significant_at_05: p < 0.05,
        method,
    })
}

/// `2 * P(W+ <= statistic)` under the null, capped at 1. Ranks are doubled so
/// half-integer tie ranks become integers and the sign-assignment counts can
/// be accumulated over achievable sums.
fn exact_p(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (2.0 * statistic).round() as usize;
    let tail: u64 = counts[..=limit.min(total)].iter().sum();
    let p = 2.0 * tail as f64 / (ranks.len() as f64).exp2();
    p.min(1.0)
}

fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let se = var.sqrt();
    let diff = w_plus - mean;
    // continuity correction toward the mean
    let z = (diff - 0.5 * diff.signum() * f64::from(diff != 0.0)) / se;
    let p = erfc(z.abs() / std::f64::consts::SQRT_2);
    p.min(1.0)
}
