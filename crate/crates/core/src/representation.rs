//! Joint missing-view imputation and dual representation learning.
//!
//! Every view is factored as `X̃^v ≈ H_s^vᵀ B_s^v + H_cᵀ B_c^v`, where `H_c`
//! is shared by all views and `H_s^v` is specific to view `v`. Missing rows
//! are filled through an error matrix, `X̃^v = X^v + E^v U^v`, that is
//! learned together with the factors. The objective (all norms squared) is
//!
//! ```text
//! J = Σ_v ‖X̃^v − H_s^vᵀB_s^v − H_cᵀB_c^v‖²  + λ1 Σ_v ‖H_s^vᵀ H_c‖²
//!   + λ2 Σ_v [tr(X̃^vᵀ L_s^v X̃^v) + tr(X̃^vᵀ L_c X̃^v)]
//!   + λ3 Σ_v [tr(X̃^vᵀ Ã_s^v X̃^v) + tr(X̃^vᵀ Ã_c X̃^v)]
//! ```
//!
//! with graph operators rebuilt from the current representations. Each block
//! update is the exact minimizer of `J` (plus a tiny ridge) with the other
//! blocks and the graphs held fixed.

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graphs::{knn_graph, Bandwidth, GraphOperators};
use crate::linalg::{extended_f64, frob_sq, masked_column_means, matrix_serde, quad_trace, solve_spd};

/// When to rebuild the similarity graphs during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphRefresh {
    /// Rebuild at the start of every `k`-th iteration.
    Every(usize),
    /// Build once from the initial representations and keep.
    Frozen,
}

impl Serialize for GraphRefresh {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GraphRefresh::Every(k) => s.serialize_u64(*k as u64),
            GraphRefresh::Frozen => s.serialize_str("never"),
        }
    }
}

impl<'de> Deserialize<'de> for GraphRefresh {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(0) => Err(serde::de::Error::custom("graph_refresh must be >= 1")),
            Repr::Num(k) => Ok(GraphRefresh::Every(k as usize)),
            Repr::Text(t) => match t.as_str() {
                "never" | "inf" | "frozen" => Ok(GraphRefresh::Frozen),
                other => Err(serde::de::Error::custom(format!("unknown graph_refresh '{other}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrlConfig {
    /// Shared latent dimension of common and specific representations.
    pub latent_dim: usize,
    /// Orthogonality weight between specific and common representations.
    pub lambda1: f64,
    /// First-order (Laplacian) graph weight.
    pub lambda2: f64,
    /// Second-order (local reconstruction) graph weight.
    pub lambda3: f64,
    pub neighbors: usize,
    pub max_iters: usize,
    #[serde(with = "extended_f64")]
    pub tol: f64,
    pub ridge: f64,
    pub graph_refresh: GraphRefresh,
    pub seed: u64,
}

impl Default for DrlConfig {
    fn default() -> Self {
        Self {
            latent_dim: 10,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            neighbors: 5,
            max_iters: 100,
            tol: 1e-6,
            ridge: 1e-8,
            graph_refresh: GraphRefresh::Every(1),
            seed: 0,
        }
    }
}

impl DrlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::invalid("latent_dim must be at least 1"));
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be a finite non-negative real, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return Err(Error::invalid("ridge must be positive"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::invalid("tol must be non-negative"));
        }
        if self.neighbors == 0 {
            return Err(Error::invalid("neighbors must be at least 1"));
        }
        if self.graph_refresh == GraphRefresh::Every(0) {
            return Err(Error::invalid("graph_refresh must be at least 1"));
        }
        Ok(())
    }
}

/// Per-view factors and imputation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewFactors {
    pub name: String,
    /// Zero-filled observed data `X^v` (`N x d`).
    #[serde(with = "matrix_serde")]
    pub observed: DMatrix<f64>,
    /// Diagonal of `E^v`: true where the instance is missing in this view.
    pub missing: Vec<bool>,
    /// `B_s^v` (`m x d`).
    #[serde(with = "matrix_serde")]
    pub specific_basis: DMatrix<f64>,
    /// `B_c^v` (`m x d`).
    #[serde(with = "matrix_serde")]
    pub common_basis: DMatrix<f64>,
    /// `H_s^v` (`m x N`).
    #[serde(with = "matrix_serde")]
    pub specific_repr: DMatrix<f64>,
    /// `U^v` (`N x d`), nonzero only on missing rows.
    #[serde(with = "matrix_serde")]
    pub error: DMatrix<f64>,
    /// `X̃^v = X^v + E^v U^v`.
    #[serde(with = "matrix_serde")]
    pub imputed: DMatrix<f64>,
}

impl ViewFactors {
    pub fn missing_indices(&self) -> Vec<usize> {
        self.missing
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    fn refresh_imputed(&mut self) {
        self.imputed = &self.observed + &self.error;
    }

    /// `X̃^v − H_s^vᵀ B_s^v − H_cᵀ B_c^v`.
    pub fn residual(&self, common_repr: &DMatrix<f64>) -> DMatrix<f64> {
        &self.imputed
            - self.specific_repr.transpose() * &self.specific_basis
            - common_repr.transpose() * &self.common_basis
    }
}

/// A fitted (or transformed) dual representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrlModel {
    pub config: DrlConfig,
    pub views: Vec<ViewFactors>,
    /// `H_c` (`m x N`).
    #[serde(with = "matrix_serde")]
    pub common_repr: DMatrix<f64>,
    /// Observed-row feature means per view, used to warm-start missing rows.
    pub feature_means: Vec<Vec<f64>>,
    pub objective_trace: Vec<f64>,
}

/// Graph operators for one epoch: one per view from `H_s^v`, one from `H_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrlGraphs {
    pub specific: Vec<GraphOperators>,
    pub common: GraphOperators,
}

/// The optimization variables of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Error(usize),
    SpecificRepr(usize),
    SpecificBasis(usize),
    CommonBasis(usize),
    CommonRepr,
}

/// Objective value split by term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub reconstruction: f64,
    pub orthogonality: f64,
    pub first_order: f64,
    pub second_order: f64,
    pub total: f64,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

fn warm_start(observed: &DMatrix<f64>, missing: &[bool], means: &[f64]) -> DMatrix<f64> {
    let mut error = DMatrix::zeros(observed.nrows(), observed.ncols());
    for (i, _) in missing.iter().enumerate().filter(|(_, &m)| m) {
        for (j, &mean) in means.iter().enumerate() {
            error[(i, j)] = mean;
        }
    }
    error
}

/// Random uniform `[0, 1)` factors; missing rows start at the observed
/// feature means.
pub fn init_model(ds: &MultiViewDataset, cfg: &DrlConfig) -> Result<DrlModel> {
    cfg.validate()?;
    let n = ds.n_instances();
    let m = cfg.latent_dim;
    if let Some(&d) = ds.dims().iter().min() {
        if m > d {
            warn!("latent_dim {m} exceeds the smallest view dimension {d}; factorization is over-parameterized");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let common_repr = uniform(&mut rng, m, n);
    let mut views = Vec::with_capacity(ds.n_views());
    let mut feature_means = Vec::with_capacity(ds.n_views());
    for block in &ds.views {
        let d = block.dim();
        let means = masked_column_means(&block.data, &block.present).ok_or_else(|| {
            Error::invalid(format!("view '{}' has no observed rows", block.name))
        })?;
        let missing: Vec<bool> = block.present.iter().map(|p| !p).collect();
        let error = warm_start(&block.data, &missing, &means);
        let mut view = ViewFactors {
            name: block.name.clone(),
            observed: block.data.clone(),
            missing,
            specific_repr: uniform(&mut rng, m, n),
            specific_basis: uniform(&mut rng, m, d),
            common_basis: uniform(&mut rng, m, d),
            error,
            imputed: DMatrix::zeros(n, d),
        };
        view.refresh_imputed();
        views.push(view);
        feature_means.push(means);
    }
    Ok(DrlModel {
        config: cfg.clone(),
        views,
        common_repr,
        feature_means,
        objective_trace: Vec::new(),
    })
}

fn graph_from_repr(repr: &DMatrix<f64>, neighbors: usize) -> Result<GraphOperators> {
    let n = repr.ncols();
    if n < 2 {
        return Ok(GraphOperators::empty(n));
    }
    let graph = knn_graph(&repr.transpose(), neighbors, Bandwidth::Median)?;
    Ok(GraphOperators::from_graph(&graph))
}

impl DrlModel {
    pub fn n_instances(&self) -> usize {
        self.common_repr.ncols()
    }

    pub fn latent_dim(&self) -> usize {
        self.common_repr.nrows()
    }

    /// Rebuilds every graph from the current representations.
    pub fn refresh_graphs(&self) -> Result<DrlGraphs> {
        let p = self.config.neighbors;
        let specific = self
            .views
            .iter()
            .map(|v| graph_from_repr(&v.specific_repr, p))
            .collect::<Result<Vec<_>>>()?;
        let common = graph_from_repr(&self.common_repr, p)?;
        Ok(DrlGraphs { specific, common })
    }

    fn check_graphs(&self, graphs: &DrlGraphs) -> Result<()> {
        let n = self.n_instances();
        let ok = graphs.specific.len() == self.views.len()
            && graphs.common.laplacian.nrows() == n
            && graphs.specific.iter().all(|g| g.laplacian.nrows() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::dim("graph operators do not match the model"))
        }
    }

    /// `λ2 (L_s^v + L_c) + λ3 (Ã_s^v + Ã_c)` restricted to rows `rows`.
    fn smoothing_rows(&self, v: usize, graphs: &DrlGraphs, rows: &[usize]) -> DMatrix<f64> {
        let n = self.n_instances();
        let (l2, l3) = (self.config.lambda2, self.config.lambda3);
        let spec = &graphs.specific[v];
        let common = &graphs.common;
        DMatrix::from_fn(rows.len(), n, |r, j| {
            let i = rows[r];
            l2 * (spec.laplacian[(i, j)] + common.laplacian[(i, j)])
                + l3 * (spec.reconstruction[(i, j)] + common.reconstruction[(i, j)])
        })
    }

    /// Closed-form update of `U^v` on the missing rows of view `v`.
    ///
    /// The stationarity system is singular on observed rows (`E^v` zeroes
    /// them), so only the missing-row block is solved, with ridge `ε`.
    pub fn update_error(&mut self, v: usize, graphs: &DrlGraphs) -> Result<()> {
        self.check_graphs(graphs)?;
        let rows = self.views[v].missing_indices();
        let view = &self.views[v];
        if rows.is_empty() {
            let view = &mut self.views[v];
            view.error.fill(0.0);
            view.refresh_imputed();
            return Ok(());
        }
        let a_rows = self.smoothing_rows(v, graphs, &rows);
        let mut system = a_rows.select_columns(rows.iter());
        for r in 0..rows.len() {
            system[(r, r)] += 1.0;
        }
        let hs = view.specific_repr.select_columns(rows.iter());
        let hc = self.common_repr.select_columns(rows.iter());
        let recon = hs.transpose() * &view.specific_basis + hc.transpose() * &view.common_basis;
        let observed_rows = view.observed.select_rows(rows.iter());
        let rhs = recon - observed_rows - &a_rows * &view.observed;
        let solution = solve_spd(&system, &rhs, self.config.ridge).map_err(|e| {
            Error::Singular(format!("error-matrix update for view {v}: {e}"))
        })?;
        let view = &mut self.views[v];
        view.error.fill(0.0);
        for (r, &i) in rows.iter().enumerate() {
            view.error.set_row(i, &solution.row(r));
        }
        view.refresh_imputed();
        Ok(())
    }

    /// `H_s^v = (B_s B_sᵀ + λ1 H_c H_cᵀ + εI)⁻¹ (B_s X̃ᵀ − B_s B_cᵀ H_c)`.
    pub fn update_specific_repr(&mut self, v: usize) -> Result<()> {
        let hc = &self.common_repr;
        let view = &self.views[v];
        let bs = &view.specific_basis;
        let lhs = bs * bs.transpose() + self.config.lambda1 * (hc * hc.transpose());
        let rhs = bs * view.imputed.transpose() - bs * view.common_basis.transpose() * hc;
        let hs = solve_spd(&lhs, &rhs, self.config.ridge)?;
        self.views[v].specific_repr = hs;
        Ok(())
    }

    /// `B_s^v = (H_s H_sᵀ + εI)⁻¹ (H_s X̃ − H_s H_cᵀ B_c)`.
    pub fn update_specific_basis(&mut self, v: usize) -> Result<()> {
        let hc = &self.common_repr;
        let view = &self.views[v];
        let hs = &view.specific_repr;
        let lhs = hs * hs.transpose();
        let rhs = hs * &view.imputed - hs * hc.transpose() * &view.common_basis;
        let bs = solve_spd(&lhs, &rhs, self.config.ridge)?;
        self.views[v].specific_basis = bs;
        Ok(())
    }

    /// `B_c^v = (H_c H_cᵀ + εI)⁻¹ (H_c X̃ − H_c H_sᵀ B_s)`, per view.
    pub fn update_common_basis(&mut self, v: usize) -> Result<()> {
        let hc = &self.common_repr;
        let view = &self.views[v];
        let lhs = hc * hc.transpose();
        let rhs = hc * &view.imputed - hc * view.specific_repr.transpose() * &view.specific_basis;
        let bc = solve_spd(&lhs, &rhs, self.config.ridge)?;
        self.views[v].common_basis = bc;
        Ok(())
    }

    /// `H_c = (Σ B_c B_cᵀ + λ1 Σ H_s H_sᵀ + εI)⁻¹ Σ (B_c X̃ᵀ − B_c B_sᵀ H_s)`.
    pub fn update_common_repr(&mut self) -> Result<()> {
        let m = self.latent_dim();
        let n = self.n_instances();
        let mut lhs = DMatrix::zeros(m, m);
        let mut rhs = DMatrix::zeros(m, n);
        for view in &self.views {
            let bc = &view.common_basis;
            let hs = &view.specific_repr;
            lhs += bc * bc.transpose() + self.config.lambda1 * (hs * hs.transpose());
            rhs += bc * view.imputed.transpose() - bc * view.specific_basis.transpose() * hs;
        }
        self.common_repr = solve_spd(&lhs, &rhs, self.config.ridge)?;
        Ok(())
    }

    /// Objective value with the given (frozen) graphs.
    pub fn objective(&self, graphs: &DrlGraphs) -> Result<ObjectiveTerms> {
        self.check_graphs(graphs)?;
        let hc = &self.common_repr;
        let mut terms = ObjectiveTerms {
            reconstruction: 0.0,
            orthogonality: 0.0,
            first_order: 0.0,
            second_order: 0.0,
            total: 0.0,
        };
        for (view, spec) in self.views.iter().zip(&graphs.specific) {
            terms.reconstruction += frob_sq(&view.residual(hc));
            terms.orthogonality += frob_sq(&(view.specific_repr.transpose() * hc));
            let x = &view.imputed;
            terms.first_order += quad_trace(x, &spec.laplacian) + quad_trace(x, &graphs.common.laplacian);
            terms.second_order +=
                quad_trace(x, &spec.reconstruction) + quad_trace(x, &graphs.common.reconstruction);
        }
        let c = &self.config;
        terms.total = terms.reconstruction
            + c.lambda1 * terms.orthogonality
            + c.lambda2 * terms.first_order
            + c.lambda3 * terms.second_order;
        if !terms.total.is_finite() {
            return Err(Error::Divergence(format!("objective is {}", terms.total)));
        }
        Ok(terms)
    }

    /// Analytic partial gradient of the objective for one block. Rows of
    /// `U^v` at observed instances are not free and report zero.
    pub fn gradient(&self, block: Block, graphs: &DrlGraphs) -> DMatrix<f64> {
        let hc = &self.common_repr;
        let c = &self.config;
        match block {
            Block::Error(v) => {
                let view = &self.views[v];
                let spec = &graphs.specific[v];
                let x = &view.imputed;
                let mut g = 2.0
                    * (view.residual(hc)
                        + c.lambda2 * ((&spec.laplacian + &graphs.common.laplacian) * x)
                        + c.lambda3 * ((&spec.reconstruction + &graphs.common.reconstruction) * x));
                for (i, &missing) in view.missing.iter().enumerate() {
                    if !missing {
                        g.row_mut(i).fill(0.0);
                    }
                }
                g
            }
            Block::SpecificRepr(v) => {
                let view = &self.views[v];
                -2.0 * &view.specific_basis * view.residual(hc).transpose()
                    + 2.0 * c.lambda1 * (hc * hc.transpose() * &view.specific_repr)
            }
            Block::SpecificBasis(v) => {
                let view = &self.views[v];
                -2.0 * &view.specific_repr * view.residual(hc)
            }
            Block::CommonBasis(v) => {
                let view = &self.views[v];
                -2.0 * hc * view.residual(hc)
            }
            Block::CommonRepr => {
                let mut g = DMatrix::zeros(hc.nrows(), hc.ncols());
                for view in &self.views {
                    let hs = &view.specific_repr;
                    g += -2.0 * &view.common_basis * view.residual(hc).transpose()
                        + 2.0 * c.lambda1 * (hs * hs.transpose() * hc);
                }
                g
            }
        }
    }

    /// Immutable access to a block's current value.
    pub fn block(&self, block: Block) -> &DMatrix<f64> {
        match block {
            Block::Error(v) => &self.views[v].error,
            Block::SpecificRepr(v) => &self.views[v].specific_repr,
            Block::SpecificBasis(v) => &self.views[v].specific_basis,
            Block::CommonBasis(v) => &self.views[v].common_basis,
            Block::CommonRepr => &self.common_repr,
        }
    }

    /// Mutable access to a block; callers changing `U^v` must call
    /// [`DrlModel::sync_imputed`] afterwards.
    pub fn block_mut(&mut self, block: Block) -> &mut DMatrix<f64> {
        match block {
            Block::Error(v) => &mut self.views[v].error,
            Block::SpecificRepr(v) => &mut self.views[v].specific_repr,
            Block::SpecificBasis(v) => &mut self.views[v].specific_basis,
            Block::CommonBasis(v) => &mut self.views[v].common_basis,
            Block::CommonRepr => &mut self.common_repr,
        }
    }

    /// Recomputes every `X̃^v` from `X^v` and `U^v`.
    pub fn sync_imputed(&mut self) {
        for view in &mut self.views {
            view.refresh_imputed();
        }
    }

    /// Applies the closed-form update for `block`.
    pub fn update(&mut self, block: Block, graphs: &DrlGraphs) -> Result<()> {
        match block {
            Block::Error(v) => self.update_error(v, graphs),
            Block::SpecificRepr(v) => self.update_specific_repr(v),
            Block::SpecificBasis(v) => self.update_specific_basis(v),
            Block::CommonBasis(v) => self.update_common_basis(v),
            Block::CommonRepr => self.update_common_repr(),
        }
    }

    /// Relative change test shared by fit and transform.
    fn converged(prev: f64, cur: f64, tol: f64) -> bool {
        (cur - prev).abs() / cur.max(1.0) < tol
    }

    fn run(&mut self, sweep: &[Vec<Block>], tail: &[Block]) -> Result<()> {
        let refresh = self.config.graph_refresh;
        let mut graphs = self.refresh_graphs()?;
        let mut prev = self.objective(&graphs)?.total;
        self.objective_trace.clear();
        for t in 0..self.config.max_iters {
            if let GraphRefresh::Every(k) = refresh {
                if t > 0 && t % k == 0 {
                    graphs = self.refresh_graphs()?;
                }
            }
            for view_blocks in sweep {
                for &b in view_blocks {
                    self.update(b, &graphs)?;
                }
            }
            for &b in tail {
                self.update(b, &graphs)?;
            }
            let cur = self.objective(&graphs).map_err(|e| {
                Error::Divergence(format!("iteration {}: {e}", t + 1))
            })?;
            self.objective_trace.push(cur.total);
            if Self::converged(prev, cur.total, self.config.tol) {
                break;
            }
            prev = cur.total;
        }
        Ok(())
    }

    /// True when every observed row of `X̃^v` still equals `X^v` bit for bit.
    pub fn observed_rows_intact(&self) -> bool {
        self.views.iter().all(|v| {
            v.missing.iter().enumerate().all(|(i, &m)| {
                m || v.imputed.row(i).iter().zip(v.observed.row(i).iter()).all(|(a, b)| a.to_bits() == b.to_bits())
            })
        })
    }
}

/// Trains the dual representation by block coordinate descent: per view
/// `U`, `H_s`, `B_s`, `B_c`, then `H_c`, until the relative objective change
/// drops below `tol` or `max_iters` is reached.
pub fn fit(ds: &MultiViewDataset, cfg: &DrlConfig) -> Result<DrlModel> {
    let mut model = init_model(ds, cfg)?;
    let sweep: Vec<Vec<Block>> = (0..ds.n_views())
        .map(|v| {
            vec![
                Block::Error(v),
                Block::SpecificRepr(v),
                Block::SpecificBasis(v),
                Block::CommonBasis(v),
            ]
        })
        .collect();
    model.run(&sweep, &[Block::CommonRepr])?;
    Ok(model)
}

const TRANSFORM_WARM_PASSES: usize = 10;

/// Learns `U_te`, `H_s,te` and `H_c,te` for unseen data with the trained
/// bases frozen. The returned model carries the test-set state.
pub fn transform(model: &DrlModel, test: &MultiViewDataset) -> Result<DrlModel> {
    if test.n_views() != model.views.len() {
        return Err(Error::dim(format!(
            "model has {} views, data has {}",
            model.views.len(),
            test.n_views()
        )));
    }
    for (trained, block) in model.views.iter().zip(&test.views) {
        let expected = trained.common_basis.ncols();
        if block.dim() != expected {
            return Err(Error::dim(format!(
                "view '{}': expected {expected} features, got {}",
                block.name,
                block.dim()
            )));
        }
    }
    let cfg = &model.config;
    let n = test.n_instances();
    let m = model.latent_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7e57_da7a_5eed_0001);
    let common_repr = uniform(&mut rng, m, n);
    let views = model
        .views
        .iter()
        .zip(&test.views)
        .zip(&model.feature_means)
        .map(|((trained, block), means)| {
            let missing: Vec<bool> = block.present.iter().map(|p| !p).collect();
            let mut view = ViewFactors {
                name: block.name.clone(),
                observed: block.data.clone(),
                error: warm_start(&block.data, &missing, means),
                missing,
                specific_basis: trained.specific_basis.clone(),
                common_basis: trained.common_basis.clone(),
                specific_repr: uniform(&mut rng, m, n),
                imputed: DMatrix::zeros(n, block.dim()),
            };
            view.refresh_imputed();
            view
        })
        .collect();
    let mut out = DrlModel {
        config: cfg.clone(),
        views,
        common_repr,
        feature_means: model.feature_means.clone(),
        objective_trace: Vec::new(),
    };
    // The bases are already fitted, so the test representations start from
    // a least-squares fit to the mean-filled data instead of staying random
    // for the first imputation step.
    for _ in 0..TRANSFORM_WARM_PASSES {
        for v in 0..test.n_views() {
            out.update_specific_repr(v)?;
        }
        out.update_common_repr()?;
    }
    let sweep: Vec<Vec<Block>> = (0..test.n_views())
        .map(|v| vec![Block::Error(v), Block::SpecificRepr(v)])
        .collect();
    out.run(&sweep, &[Block::CommonRepr])?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{apply_mask, apply_normalizer, fit_normalizer, gen_synthetic, SyntheticConfig, ViewBlock};

    fn planted(n: usize, seed: u64) -> MultiViewDataset {
        let ds = gen_synthetic(&SyntheticConfig {
            n,
            dims: vec![4, 5, 3],
            latent_dim: 2,
            noise_sd: 0.01,
            class_sep: 3.0,
            n_classes: 2,
            seed,
        })
        .unwrap();
        apply_normalizer(&ds, &fit_normalizer(&ds).unwrap()).unwrap()
    }

    fn small_cfg() -> DrlConfig {
        DrlConfig {
            latent_dim: 2,
            neighbors: 3,
            max_iters: 20,
            ..DrlConfig::default()
        }
    }

    fn rel_grad(model: &DrlModel, block: Block, graphs: &DrlGraphs) -> f64 {
        model.gradient(block, graphs).norm() / (1.0 + model.block(block).norm())
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let ds = planted(12, 1);
        let cfg = small_cfg();
        let a = init_model(&ds, &cfg).unwrap();
        assert_eq!(a, init_model(&ds, &cfg).unwrap());
        assert_eq!(a.views[0].specific_basis.shape(), (2, 4));
        assert_eq!(a.views[1].specific_basis.shape(), (2, 5));
        assert_eq!(a.common_repr.shape(), (2, 12));
        for v in &a.views {
            assert_eq!(v.imputed, v.observed);
        }
    }

    #[test]
    fn config_round_trips_infinite_tol_and_frozen_graphs() {
        let cfg = DrlConfig {
            tol: f64::INFINITY,
            graph_refresh: GraphRefresh::Frozen,
            ..DrlConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains(r#""tol":"inf""#));
        assert!(text.contains(r#""graph_refresh":"never""#));
        let back: DrlConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: DrlConfig = serde_json::from_str(r#"{"latent_dim": 3}"#).unwrap();
        assert_eq!(partial.latent_dim, 3);
        assert_eq!(partial.lambda1, 1.0);
    }

    #[test]
    fn n2_graphs_have_one_neighbor() {
        let ds = planted(2, 4);
        let model = init_model(&ds, &small_cfg()).unwrap();
        let g = model.refresh_graphs().unwrap();
        assert_eq!(g.common.laplacian[(0, 1)], g.common.laplacian[(1, 0)]);
        assert!(g.common.laplacian[(0, 1)] < 0.0);
        assert_eq!(g, model.refresh_graphs().unwrap());
    }

    #[test]
    fn constant_common_repr_falls_back_to_unit_weights() {
        let ds = planted(6, 4);
        let mut model = init_model(&ds, &small_cfg()).unwrap();
        model.common_repr.fill(0.3);
        let g = knn_graph(&model.common_repr.transpose(), 3, Bandwidth::Median).unwrap();
        assert!(g.bandwidth_fallback);
        assert!(g.weights.iter().all(|&w| w == 0.0 || w == 1.0));
    }

    #[test]
    fn error_update_without_missing_rows_is_noop() {
        let ds = planted(8, 2);
        let mut model = init_model(&ds, &small_cfg()).unwrap();
        let graphs = model.refresh_graphs().unwrap();
        model.update_error(0, &graphs).unwrap();
        assert!(model.views[0].error.iter().all(|&x| x == 0.0));
        assert_eq!(model.views[0].imputed, model.views[0].observed);
    }

    #[test]
    fn error_update_without_graph_terms_copies_reconstruction() {
        let mut ds = planted(8, 2);
        ds.views[1].present[3] = false;
        ds.views[1].data.row_mut(3).fill(0.0);
        let cfg = DrlConfig {
            lambda2: 0.0,
            lambda3: 0.0,
            ..small_cfg()
        };
        let mut model = init_model(&ds, &cfg).unwrap();
        let graphs = model.refresh_graphs().unwrap();
        model.update_error(1, &graphs).unwrap();
        let view = &model.views[1];
        let recon = view.specific_repr.column(3).transpose() * &view.specific_basis
            + model.common_repr.column(3).transpose() * &view.common_basis;
        assert!((view.imputed.row(3) - recon).amax() < 1e-7);
        assert!(rel_grad(&model, Block::Error(1), &graphs) < 1e-6);
    }

    #[test]
    fn identity_basis_gives_transposed_data() {
        // λ1 = 0, B_s = I, B_c = 0  =>  H_s = X̃ᵀ
        let data = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.5, 0.4, 0.9, 0.7]);
        let ds = MultiViewDataset::new(
            vec![ViewBlock { name: "a".into(), data: data.clone(), present: vec![true; 3] }],
            vec![0, 1, 0],
            2,
        )
        .unwrap();
        let cfg = DrlConfig { lambda1: 0.0, ..small_cfg() };
        let mut model = init_model(&ds, &cfg).unwrap();
        model.views[0].specific_basis = DMatrix::identity(2, 2);
        model.views[0].common_basis = DMatrix::zeros(2, 2);
        model.update_specific_repr(0).unwrap();
        assert!((&model.views[0].specific_repr - data.transpose()).amax() < 1e-7);

        // same for the common side
        model.views[0].common_basis = DMatrix::identity(2, 2);
        model.views[0].specific_basis = DMatrix::zeros(2, 2);
        model.update_common_repr().unwrap();
        assert!((&model.common_repr - data.transpose()).amax() < 1e-7);
    }

    #[test]
    fn zero_representations_give_zero_bases() {
        let ds = planted(8, 5);
        let mut model = init_model(&ds, &small_cfg()).unwrap();
        model.views[0].specific_repr.fill(0.0);
        model.update_specific_basis(0).unwrap();
        assert!(model.views[0].specific_basis.iter().all(|&x| x == 0.0));
        model.common_repr.fill(0.0);
        model.update_common_basis(1).unwrap();
        assert!(model.views[1].common_basis.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn specific_basis_residual_is_orthogonal_to_repr() {
        let ds = planted(10, 6);
        let mut model = init_model(&ds, &small_cfg()).unwrap();
        model.update_specific_basis(2).unwrap();
        let view = &model.views[2];
        let cross = &view.specific_repr * view.residual(&model.common_repr);
        assert!(cross.amax() < 1e-6);
    }

    #[test]
    fn every_update_zeroes_its_gradient_and_never_increases_objective() {
        let mut ds = planted(10, 7);
        ds = apply_mask(&ds, 0.3, 1).unwrap();
        let mut model = init_model(&ds, &small_cfg()).unwrap();
        let graphs = model.refresh_graphs().unwrap();
        let mut blocks = Vec::new();
        for v in 0..3 {
            blocks.extend([Block::Error(v), Block::SpecificRepr(v), Block::SpecificBasis(v), Block::CommonBasis(v)]);
        }
        blocks.push(Block::CommonRepr);
        for _ in 0..3 {
            for &b in &blocks {
                let before = model.objective(&graphs).unwrap().total;
                model.update(b, &graphs).unwrap();
                let after = model.objective(&graphs).unwrap().total;
                assert!(after <= before * (1.0 + 1e-8) + 1e-12, "{b:?}: {before} -> {after}");
                assert!(rel_grad(&model, b, &graphs) < 1e-6, "{b:?}");
            }
        }
        assert!(model.observed_rows_intact());
    }

    #[test]
    fn single_view_common_basis_matches_printed_sum_form() {
        let ds = MultiViewDataset::new(
            vec![ViewBlock {
                name: "a".into(),
                data: DMatrix::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0),
                present: vec![true; 6],
            }],
            vec![0, 1, 0, 1, 0, 1],
            2,
        )
        .unwrap();
        let mut model = init_model(&ds, &small_cfg()).unwrap();
        let hc = model.common_repr.clone();
        let view = &model.views[0];
        let summed_rhs = &hc * &view.imputed - &hc * (view.specific_repr.transpose() * &view.specific_basis);
        let printed = (&hc * hc.transpose()).try_inverse().unwrap() * summed_rhs;
        model.update_common_basis(0).unwrap();
        assert!((&model.views[0].common_basis - printed).amax() < 1e-6);
    }

    #[test]
    fn orthogonality_term_vanishes_for_orthogonal_reprs() {
        let ds = planted(4, 8);
        let mut model = init_model(&ds, &DrlConfig { lambda1: 4.0, ..small_cfg() }).unwrap();
        // every latent column of H_s orthogonal to every latent column of H_c
        model.common_repr = DMatrix::from_row_slice(2, 4, &[1.0, 0.5, -2.0, 0.3, 0.0, 0.0, 0.0, 0.0]);
        for v in &mut model.views {
            v.specific_repr = DMatrix::from_row_slice(2, 4, &[0.0, 0.0, 0.0, 0.0, 0.7, 1.0, 2.0, -1.0]);
        }
        let graphs = model.refresh_graphs().unwrap();
        assert_eq!(model.objective(&graphs).unwrap().orthogonality, 0.0);
    }

    #[test]
    fn infinite_tol_runs_one_iteration() {
        let ds = planted(12, 9);
        let cfg = DrlConfig { tol: f64::INFINITY, ..small_cfg() };
        let model = fit(&ds, &cfg).unwrap();
        assert_eq!(model.objective_trace.len(), 1);
    }

    #[test]
    fn frozen_graph_fit_is_monotone() {
        let ds = apply_mask(&planted(15, 10), 0.3, 2).unwrap();
        let cfg = DrlConfig {
            graph_refresh: GraphRefresh::Frozen,
            tol: 0.0,
            max_iters: 30,
            ..small_cfg()
        };
        let model = fit(&ds, &cfg).unwrap();
        assert_eq!(model.objective_trace.len(), 30);
        for w in model.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-8), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn transform_keeps_complete_rows_and_bases() {
        let ds = planted(12, 11);
        let model = fit(&ds, &small_cfg()).unwrap();
        let out = transform(&model, &ds).unwrap();
        for (a, b) in out.views.iter().zip(&model.views) {
            assert!(a.error.iter().all(|&x| x == 0.0));
            assert_eq!(a.specific_basis, b.specific_basis);
            assert_eq!(a.common_basis, b.common_basis);
        }
    }

    #[test]
    fn transform_rejects_wrong_dimension() {
        let ds = planted(12, 11);
        let model = fit(&ds, &DrlConfig { max_iters: 2, ..small_cfg() }).unwrap();
        let mut other = ds.clone();
        other.views[1].data = DMatrix::zeros(12, 7);
        let err = transform(&model, &other).unwrap_err().to_string();
        assert!(err.contains("expected 5 features, got 7"), "{err}");
    }
}
