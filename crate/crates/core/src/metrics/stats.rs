use serde::{Deserialize, Serialize};

use super::special::{chi_square_sf, normal_sf};
use crate::error::{Error, Result};

/// Average ranks of one setting, rank 1 for the largest value.
pub fn rank_descending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            ranks[i] = avg;
        }
        start = end + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub avg_ranks: Vec<f64>,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub n_settings: usize,
    /// Every setting tied all algorithms.
    pub degenerate: bool,
}

/// Friedman test over `results[setting][algorithm]` (higher is better).
pub fn friedman_test(results: &[Vec<f64>]) -> Result<FriedmanResult> {
    let n = results.len();
    if n < 2 {
        return Err(Error::invalid(format!("Friedman test needs at least 2 settings, got {n}")));
    }
    let k = results[0].len();
    if k < 2 {
        return Err(Error::invalid(format!("Friedman test needs at least 2 algorithms, got {k}")));
    }
    let mut sums = vec![0.0; k];
    let mut degenerate = true;
    for (s, row) in results.iter().enumerate() {
        if row.len() != k {
            return Err(Error::dim(format!("setting {s} has {} results, expected {k}", row.len())));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("setting {s} has a non-finite result")));
        }
        if row.iter().any(|&x| x != row[0]) {
            degenerate = false;
        }
        for (acc, r) in sums.iter_mut().zip(rank_descending(row)) {
            *acc += r;
        }
    }
    let avg_ranks: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let (nf, kf) = (n as f64, k as f64);
    let sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let statistic = if degenerate {
        0.0
    } else {
        (12.0 * nf / (kf * (kf + 1.0)) * (sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0)
    };
    let df = k - 1;
    let p_value = if statistic == 0.0 { 1.0 } else { chi_square_sf(statistic, df as f64) };
    Ok(FriedmanResult {
        avg_ranks,
        statistic,
        df,
        p_value,
        n_settings: n,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmComparison {
    pub algorithm: usize,
    pub z: f64,
    pub p_value: f64,
    /// `alpha / i` with `i` the number of hypotheses still in play.
    pub threshold: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmResult {
    pub control: usize,
    pub alpha: f64,
    /// Ordered by increasing p-value.
    pub comparisons: Vec<HolmComparison>,
}

/// Step-down Holm procedure comparing each algorithm with `control`
/// through `z = (R_j − R_control) / sqrt(k(k+1) / 6n)` and a two-sided
/// normal p-value.
pub fn holm_posthoc(avg_ranks: &[f64], n: usize, control: usize, alpha: f64) -> Result<HolmResult> {
    let k = avg_ranks.len();
    if control >= k {
        return Err(Error::invalid(format!(
            "control index {control} out of range for {k} algorithms"
        )));
    }
    if n == 0 || k < 2 {
        return Err(Error::invalid("Holm procedure needs at least one setting and two algorithms"));
    }
    let (nf, kf) = (n as f64, k as f64);
    let se = (kf * (kf + 1.0) / (6.0 * nf)).sqrt();
    let mut comparisons: Vec<HolmComparison> = (0..k)
        .filter(|&j| j != control)
        .map(|j| {
            let z = (avg_ranks[j] - avg_ranks[control]) / se;
            HolmComparison {
                algorithm: j,
                z,
                p_value: (2.0 * normal_sf(z.abs())).min(1.0),
                threshold: 0.0,
                reject: false,
            }
        })
        .collect();
    comparisons.sort_by(|a, b| a.p_value.total_cmp(&b.p_value).then(a.algorithm.cmp(&b.algorithm)));
    let m = comparisons.len();
    let mut still_rejecting = true;
    for (pos, c) in comparisons.iter_mut().enumerate() {
        c.threshold = alpha / (m - pos) as f64;
        still_rejecting &= c.p_value < c.threshold;
        c.reject = still_rejecting;
    }
    Ok(HolmResult {
        control,
        alpha,
        comparisons,
    })
}
