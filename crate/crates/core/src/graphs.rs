//! p-nearest-neighbor Gaussian similarity graphs and the operators derived
//! from them: the Laplacian of the symmetrized graph (first-order smoothness)
//! and `(I - G)ᵀ(I - G)` of the row-normalized graph (second-order local
//! reconstruction).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the Gaussian width is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median of the neighbor distances actually used.
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    /// `N x N`, row `i` holds the weights of `i`'s nearest neighbors.
    pub weights: DMatrix<f64>,
    pub neighbors: usize,
    pub sigma: f64,
    /// Set when the bandwidth rule produced a non-positive width and `sigma`
    /// fell back to 1.
    pub bandwidth_fallback: bool,
}

impl SimilarityGraph {
    /// The edgeless graph on `n` nodes.
    pub fn empty(n: usize) -> Self {
        Self {
            weights: DMatrix::zeros(n, n),
            neighbors: 0,
            sigma: 1.0,
            bandwidth_fallback: false,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.nrows()
    }
}

/// Builds the p-NN graph over the rows of `points` (instances as rows).
///
/// Neighbors are ranked by Euclidean distance with ties going to the lower
/// index. `p` larger than `N - 1` is clamped.
pub fn knn_graph(points: &DMatrix<f64>, p: usize, bandwidth: Bandwidth) -> Result<SimilarityGraph> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::invalid(format!("p-NN graph needs at least 2 points, got {n}")));
    }
    if p == 0 {
        return Err(Error::invalid("neighbor count must be at least 1"));
    }
    let p = p.min(n - 1);

    let mut sq = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sq[(i, j)] = d;
            sq[(j, i)] = d;
        }
    }

    let mut neighbor_lists = Vec::with_capacity(n);
    let mut used = Vec::with_capacity(n * p);
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| sq[(i, a)].total_cmp(&sq[(i, b)]).then(a.cmp(&b)));
        others.truncate(p);
        used.extend(others.iter().map(|&j| sq[(i, j)].sqrt()));
        neighbor_lists.push(others);
    }

    let (sigma, bandwidth_fallback) = match bandwidth {
        Bandwidth::Fixed(s) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("fixed bandwidth {s} must be positive")));
            }
            (s, false)
        }
        Bandwidth::Median => {
            used.sort_by(f64::total_cmp);
            let mid = used.len() / 2;
            let median = if used.len() % 2 == 0 {
                0.5 * (used[mid - 1] + used[mid])
            } else {
                used[mid]
            };
            if median > 0.0 && median.is_finite() {
                (median, false)
            } else {
                (1.0, true)
            }
        }
    };

    let mut weights = DMatrix::zeros(n, n);
    let denom = 2.0 * sigma * sigma;
    for (i, list) in neighbor_lists.iter().enumerate() {
        for &j in list {
            weights[(i, j)] = (-sq[(i, j)] / denom).exp();
        }
    }
    Ok(SimilarityGraph {
        weights,
        neighbors: p,
        sigma,
        bandwidth_fallback,
    })
}

/// `L = D - S` with `S = (G + Gᵀ) / 2` and `D` its row-sum diagonal.
pub fn laplacian(graph: &SimilarityGraph) -> DMatrix<f64> {
    let g = &graph.weights;
    let n = g.nrows();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            if i != j {
                let s = 0.5 * (g[(i, j)] + g[(j, i)]);
                l[(i, j)] = -s;
                degree += s;
            }
        }
        l[(i, i)] = degree;
    }
    l
}

/// Rows with positive sum rescaled to sum to one; zero rows left as is.
pub fn row_normalized(graph: &SimilarityGraph) -> DMatrix<f64> {
    let mut g = graph.weights.clone();
    for mut row in g.row_iter_mut() {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row /= s;
        }
    }
    g
}

/// `(I - W)ᵀ(I - W)` for the row-normalized weights `W`.
pub fn reconstruction_operator(graph: &SimilarityGraph) -> DMatrix<f64> {
    let w = row_normalized(graph);
    let n = w.nrows();
    let lambda = DMatrix::identity(n, n) - w;
    let mut a = lambda.transpose() * &lambda;
    // exact symmetry; the product is symmetric only up to rounding
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    a
}

/// The pair of operators one similarity graph contributes to the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphOperators {
    pub laplacian: DMatrix<f64>,
    pub reconstruction: DMatrix<f64>,
}

impl GraphOperators {
    pub fn from_graph(graph: &SimilarityGraph) -> Self {
        Self {
            laplacian: laplacian(graph),
            reconstruction: reconstruction_operator(graph),
        }
    }

    /// Operators of the edgeless graph: `L = 0`, `Ã = I`.
    pub fn empty(n: usize) -> Self {
        Self::from_graph(&SimilarityGraph::empty(n))
    }
}
