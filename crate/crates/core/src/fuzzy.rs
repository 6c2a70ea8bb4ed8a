//! TSK fuzzy-system machinery: deterministic antecedent estimation, Gaussian
//! memberships, firing strengths and the fuzzy feature-space mapping
//! `x_g = [μ̃¹(x)·[1, x], …, μ̃ᴷ(x)·[1, x]]` that turns consequent learning
//! into linear least squares.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::matrix_serde;

/// Lower bound added to every membership width.
pub const DEFAULT_WIDTH_FLOOR: f64 = 1e-4;

/// Gaussian fuzzy sets of `K` rules over `d` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Antecedent {
    /// `K x d`
    #[serde(with = "matrix_serde")]
    pub centers: DMatrix<f64>,
    /// `K x d`, strictly positive.
    #[serde(with = "matrix_serde")]
    pub widths: DMatrix<f64>,
}

impl Antecedent {
    pub fn n_rules(&self) -> usize {
        self.centers.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.centers.ncols()
    }

    /// Columns of the fuzzy feature space, `K (1 + d)`.
    pub fn mapped_dim(&self) -> usize {
        self.n_rules() * (1 + self.n_features())
    }
}

fn sse(x: &DMatrix<f64>, members: &[usize]) -> f64 {
    let d = x.ncols();
    let n = members.len() as f64;
    (0..d)
        .map(|j| {
            let mean = members.iter().map(|&i| x[(i, j)]).sum::<f64>() / n;
            members.iter().map(|&i| (x[(i, j)] - mean).powi(2)).sum::<f64>()
        })
        .sum()
}

fn cluster_mean(x: &DMatrix<f64>, members: &[usize]) -> Vec<f64> {
    let n = members.len() as f64;
    (0..x.ncols())
        .map(|j| members.iter().map(|&i| x[(i, j)]).sum::<f64>() / n)
        .collect()
}

/// Variance partitioning: starting from one cluster, repeatedly split the
/// cluster with the largest within-cluster SSE at the mean of its
/// highest-variance feature. Returns the `K x d` cluster means.
///
/// Ties go to the lowest index. A cluster whose points are all identical
/// cannot be split by a threshold; its last member is peeled off instead.
pub fn varpart_centers(x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if k == 0 {
        return Err(Error::invalid("number of rules must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("cannot form {k} clusters from {n} rows")));
    }
    let mut clusters: Vec<Vec<usize>> = vec![(0..n).collect()];
    while clusters.len() < k {
        let scores: Vec<f64> = clusters
            .iter()
            .map(|c| if c.len() > 1 { sse(x, c) } else { f64::NEG_INFINITY })
            .collect();
        let mut target = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[target] {
                target = i;
            }
        }
        let members = std::mem::take(&mut clusters[target]);
        let mean = cluster_mean(x, &members);
        let mut feature = 0;
        let mut best = f64::NEG_INFINITY;
        for (j, &mu) in mean.iter().enumerate() {
            let var = members.iter().map(|&i| (x[(i, j)] - mu).powi(2)).sum::<f64>();
            if var > best {
                best = var;
                feature = j;
            }
        }
        let (mut left, mut right): (Vec<usize>, Vec<usize>) =
            members.iter().partition(|&&i| x[(i, feature)] <= mean[feature]);
        if left.is_empty() || right.is_empty() {
            let mut all = members;
            let last = all.pop().expect("split target has at least two members");
            left = all;
            right = vec![last];
        }
        clusters[target] = left;
        clusters.push(right);
    }
    let d = x.ncols();
    let mut centers = DMatrix::zeros(k, d);
    for (r, c) in clusters.iter().enumerate() {
        for (j, v) in cluster_mean(x, c).into_iter().enumerate() {
            centers[(r, j)] = v;
        }
    }
    Ok(centers)
}

/// Index of the nearest center for every row (ties to the lower index).
pub fn nearest_centers(x: &DMatrix<f64>, centers: &DMatrix<f64>) -> Vec<usize> {
    x.row_iter()
        .map(|row| {
            let mut best = (f64::INFINITY, 0);
            for (k, c) in centers.row_iter().enumerate() {
                let d: f64 = row.iter().zip(c.iter()).map(|(a, b)| (a - b).powi(2)).sum();
                if d < best.0 {
                    best = (d, k);
                }
            }
            best.1
        })
        .collect()
}

/// Centers from [`varpart_centers`]; widths are `scale` times the
/// within-cluster variance (nearest-center assignment) plus `floor`.
pub fn estimate_antecedent(x: &DMatrix<f64>, k: usize, scale: f64, floor: f64) -> Result<Antecedent> {
    if !(floor > 0.0) {
        return Err(Error::invalid("width floor must be positive"));
    }
    if !(scale >= 0.0) {
        return Err(Error::invalid("width scale must be non-negative"));
    }
    let centers = varpart_centers(x, k)?;
    let assignment = nearest_centers(x, &centers);
    let d = x.ncols();
    let mut widths = DMatrix::from_element(k, d, floor);
    for r in 0..k {
        let members: Vec<usize> = (0..x.nrows()).filter(|&i| assignment[i] == r).collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len() as f64;
        for j in 0..d {
            let mean = members.iter().map(|&i| x[(i, j)]).sum::<f64>() / n;
            let var = members.iter().map(|&i| (x[(i, j)] - mean).powi(2)).sum::<f64>() / n;
            widths[(r, j)] = scale * var + floor;
        }
    }
    Ok(Antecedent { centers, widths })
}

/// `exp(-(x - e)² / (2q))`.
pub fn membership(x: f64, center: f64, width: f64) -> f64 {
    (-(x - center).powi(2) / (2.0 * width)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiringStrengths {
    /// `μ^k(x)`, the product of memberships (may underflow to 0).
    pub raw: Vec<f64>,
    /// `μ̃^k(x)`, summing to one.
    pub normalized: Vec<f64>,
    /// Set when the log-strengths were not finite and the uniform
    /// distribution was used instead.
    pub fallback: bool,
}

/// Firing strengths of every rule for one input row, normalized in log space
/// so that products of many small memberships do not underflow.
pub fn firing_strengths(x: &[f64], ant: &Antecedent) -> FiringStrengths {
    let k = ant.n_rules();
    let logs: Vec<f64> = (0..k)
        .map(|r| {
            x.iter()
                .enumerate()
                .map(|(j, &xj)| -(xj - ant.centers[(r, j)]).powi(2) / (2.0 * ant.widths[(r, j)]))
                .sum()
        })
        .collect();
    let raw: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() || logs.iter().any(|l| l.is_nan()) {
        return FiringStrengths {
            raw,
            normalized: vec![1.0 / k as f64; k],
            fallback: true,
        };
    }
    let shifted: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = shifted.iter().sum();
    FiringStrengths {
        raw,
        normalized: shifted.into_iter().map(|s| s / total).collect(),
        fallback: false,
    }
}

/// Maps every row of `x` (`N x d`) into the fuzzy feature space
/// (`N x K(1+d)`).
pub fn fuzzy_map(x: &DMatrix<f64>, ant: &Antecedent) -> Result<DMatrix<f64>> {
    let d = ant.n_features();
    if x.ncols() != d {
        return Err(Error::dim(format!(
            "antecedent expects {d} features, data has {}",
            x.ncols()
        )));
    }
    let k = ant.n_rules();
    let mut out = DMatrix::zeros(x.nrows(), k * (1 + d));
    let mut row = vec![0.0; d];
    for i in 0..x.nrows() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = x[(i, j)];
        }
        let fs = firing_strengths(&row, ant);
        for (r, &w) in fs.normalized.iter().enumerate() {
            let base = r * (1 + d);
            out[(i, base)] = w;
            for j in 0..d {
                out[(i, base + 1 + j)] = w * row[j];
            }
        }
    }
    Ok(out)
}

/// `Y = X_g P_g`.
pub fn tsk_output(mapped: &DMatrix<f64>, consequent: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if mapped.ncols() != consequent.nrows() {
        return Err(Error::dim(format!(
            "mapped data has {} columns, consequent has {} rows",
            mapped.ncols(),
            consequent.nrows()
        )));
    }
    Ok(mapped * consequent)
}

/// Affine output of every rule for one input: `f_k^c(x) = p_0^{k,c} + Σ_j p_j^{k,c} x_j`
/// as a `K x C` matrix.
pub fn rule_outputs(x: &[f64], ant: &Antecedent, consequent: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = ant.n_features();
    let k = ant.n_rules();
    if x.len() != d || consequent.nrows() != k * (1 + d) {
        return Err(Error::dim(format!(
            "rule evaluation needs {d} features and {} consequent rows",
            k * (1 + d)
        )));
    }
    let c = consequent.ncols();
    Ok(DMatrix::from_fn(k, c, |r, class| {
        let base = r * (1 + d);
        consequent[(base, class)]
            + x.iter()
                .enumerate()
                .map(|(j, &xj)| consequent[(base + 1 + j, class)] * xj)
                .sum::<f64>()
    }))
}

/// Rule-by-rule evaluation `y = Σ_k μ̃^k(x) f_k(x)` for one input row.
pub fn rule_based_output(x: &[f64], ant: &Antecedent, consequent: &DMatrix<f64>) -> Result<Vec<f64>> {
    let outputs = rule_outputs(x, ant, consequent)?;
    let fs = firing_strengths(x, ant);
    Ok((0..outputs.ncols())
        .map(|c| (0..outputs.nrows()).map(|r| fs.normalized[r] * outputs[(r, c)]).sum())
        .collect())
}
