//! Cooperative multi-view TSK classifier over the imputed views plus the
//! learned common view `Z_c = H_cᵀ` and specific view `Z_s = [H_s^1ᵀ, …, H_s^Vᵀ]`.
//!
//! Each view `v` has its own antecedent and consequent `P_v`. Training
//! alternates a Gauss–Seidel sweep of per-view consequent solves
//!
//! ```text
//! P_v = ((α_v + β) X_vᵀX_v + δI)⁻¹ (α_v X_vᵀY + β X_vᵀΛ_v)
//! ```
//!
//! (`Λ_v` aggregates the other views' current predictions) with the entropy
//! weights `α = softmax(−ℓ/γ)`, `ℓ_v = ‖X_v P_v − Y‖²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::one_hot;
use crate::error::{Error, Result};
use crate::fuzzy::{estimate_antecedent, fuzzy_map, Antecedent, DEFAULT_WIDTH_FLOOR};
use crate::linalg::{frob_sq, matrix_serde, solve_spd};
use crate::representation::DrlModel;

/// How the cooperation target `Λ_v` aggregates the other views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentMode {
    /// Average of the other views' predictions.
    Mean,
    /// Unaveraged sum of the other views' predictions.
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Fuzzy rules per view.
    pub rules: usize,
    /// Cooperation weight.
    pub beta: f64,
    /// Entropy temperature of the view weights.
    pub gamma: f64,
    /// Consequent ridge weight.
    pub delta: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub alignment: AlignmentMode,
    /// Multiplier on within-cluster variance for membership widths.
    pub width_scale: f64,
    pub width_floor: f64,
    /// Include the common view `Z_c`.
    pub use_common: bool,
    /// Include the specific view `Z_s`.
    pub use_specific: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            rules: 4,
            beta: 1.0,
            gamma: 1.0,
            delta: 1.0,
            max_iters: 100,
            tol: 1e-6,
            alignment: AlignmentMode::Mean,
            width_scale: 1.0,
            width_floor: DEFAULT_WIDTH_FLOOR,
            use_common: true,
            use_specific: true,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rules == 0 {
            return Err(Error::invalid("rules must be at least 1"));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::invalid("beta must be non-negative"));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.width_floor > 0.0) || !(self.width_scale >= 0.0) {
            return Err(Error::invalid("width floor must be positive and scale non-negative"));
        }
        Ok(())
    }
}

/// Where a view of the ensemble comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViewRole {
    Imputed { index: usize, name: String },
    Common,
    Specific,
}

impl ViewRole {
    pub fn name(&self) -> &str {
        match self {
            ViewRole::Imputed { name, .. } => name,
            ViewRole::Common => "common",
            ViewRole::Specific => "specific",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyView {
    pub role: ViewRole,
    pub antecedent: Antecedent,
    /// `K(1+d) x C`
    #[serde(with = "matrix_serde")]
    pub consequent: DMatrix<f64>,
}

/// Trained per-view TSK systems and their simplex weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEnsemble {
    pub config: ClassifierConfig,
    pub n_classes: usize,
    pub views: Vec<FuzzyView>,
    pub weights: Vec<f64>,
    pub sweeps: usize,
    pub objective_trace: Vec<f64>,
}

/// Raw design matrices (`N x d`) in ensemble order: imputed views, then the
/// common view, then the specific view (subject to the config toggles).
pub fn assemble_views(drl: &DrlModel, cfg: &ClassifierConfig) -> Vec<(ViewRole, DMatrix<f64>)> {
    let mut out: Vec<(ViewRole, DMatrix<f64>)> = drl
        .views
        .iter()
        .enumerate()
        .map(|(index, v)| {
            (
                ViewRole::Imputed {
                    index,
                    name: v.name.clone(),
                },
                v.imputed.clone(),
            )
        })
        .collect();
    if cfg.use_common {
        out.push((ViewRole::Common, drl.common_repr.transpose()));
    }
    if cfg.use_specific {
        let n = drl.n_instances();
        let m = drl.latent_dim();
        let mut z = DMatrix::zeros(n, m * drl.views.len());
        for (v, view) in drl.views.iter().enumerate() {
            z.view_mut((0, v * m), (n, m)).copy_from(&view.specific_repr.transpose());
        }
        out.push((ViewRole::Specific, z));
    }
    out
}

/// Cooperation target `Λ_v` from the current per-view predictions.
pub fn alignment_target(predictions: &[DMatrix<f64>], v: usize, mode: AlignmentMode) -> DMatrix<f64> {
    let (rows, cols) = predictions[v].shape();
    let mut sum = DMatrix::zeros(rows, cols);
    for (l, p) in predictions.iter().enumerate() {
        if l != v {
            sum += p;
        }
    }
    match mode {
        AlignmentMode::Sum => sum,
        AlignmentMode::Mean if predictions.len() > 1 => sum / (predictions.len() - 1) as f64,
        AlignmentMode::Mean => sum,
    }
}

fn predictions(mapped: &[DMatrix<f64>], consequents: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    mapped.iter().zip(consequents).map(|(x, p)| x * p).collect()
}

/// Closed-form minimizer of view `v`'s subproblem
/// `α_v‖X P − Y‖² + β‖X P − Λ‖² + δ‖P‖²` for a fixed target `Λ`.
pub fn solve_consequent(
    mapped: &DMatrix<f64>,
    y: &DMatrix<f64>,
    target: &DMatrix<f64>,
    weight: f64,
    cfg: &ClassifierConfig,
) -> Result<DMatrix<f64>> {
    let gram = mapped.transpose() * mapped;
    let lhs = (weight + cfg.beta) * gram;
    let rhs = mapped.transpose() * (weight * y + cfg.beta * target);
    solve_spd(&lhs, &rhs, cfg.delta)
}

/// Gradient of view `v`'s subproblem with respect to `P_v` at the current
/// consequents (the other views fixed through `Λ_v`).
pub fn subproblem_gradient(
    mapped: &[DMatrix<f64>],
    y: &DMatrix<f64>,
    consequents: &[DMatrix<f64>],
    weights: &[f64],
    v: usize,
    cfg: &ClassifierConfig,
) -> DMatrix<f64> {
    let preds = predictions(mapped, consequents);
    let target = alignment_target(&preds, v, cfg.alignment);
    let x = &mapped[v];
    let fit = &preds[v];
    2.0 * (weights[v] * x.transpose() * (fit - y)
        + cfg.beta * x.transpose() * (fit - target)
        + cfg.delta * &consequents[v])
}

/// One Gauss–Seidel sweep over all views; returns the largest relative
/// consequent change `‖ΔP‖ / (1 + ‖P‖)`.
pub fn update_consequents(
    mapped: &[DMatrix<f64>],
    y: &DMatrix<f64>,
    consequents: &mut [DMatrix<f64>],
    weights: &[f64],
    cfg: &ClassifierConfig,
) -> Result<f64> {
    let mut preds = predictions(mapped, consequents);
    let mut change: f64 = 0.0;
    for v in 0..mapped.len() {
        let target = alignment_target(&preds, v, cfg.alignment);
        let next = solve_consequent(&mapped[v], y, &target, weights[v], cfg)?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence(format!("consequent of view {v} is not finite")));
        }
        change = change.max((&next - &consequents[v]).norm() / (1.0 + next.norm()));
        preds[v] = &mapped[v] * &next;
        consequents[v] = next;
    }
    Ok(change)
}

/// Per-view squared training loss `‖X_v P_v − Y‖²`.
pub fn view_losses(mapped: &[DMatrix<f64>], y: &DMatrix<f64>, consequents: &[DMatrix<f64>]) -> Vec<f64> {
    mapped
        .iter()
        .zip(consequents)
        .map(|(x, p)| frob_sq(&(x * p - y)))
        .collect()
}

/// `softmax(−ℓ / γ)`, shifted by the smallest loss.
pub fn entropy_weights(losses: &[f64], gamma: f64) -> Vec<f64> {
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = losses.iter().map(|l| (-(l - best) / gamma).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

pub fn update_weights(
    mapped: &[DMatrix<f64>],
    y: &DMatrix<f64>,
    consequents: &[DMatrix<f64>],
    cfg: &ClassifierConfig,
) -> Vec<f64> {
    entropy_weights(&view_losses(mapped, y, consequents), cfg.gamma)
}

/// `γ Σ α ln α` with `0 ln 0 = 0`.
pub fn entropy_term(weights: &[f64], gamma: f64) -> f64 {
    gamma
        * weights
            .iter()
            .map(|&a| if a > 0.0 { a * a.ln() } else { 0.0 })
            .sum::<f64>()
}

/// Training objective: weighted fit, cooperation, entropy and ridge terms.
pub fn objective(
    mapped: &[DMatrix<f64>],
    y: &DMatrix<f64>,
    consequents: &[DMatrix<f64>],
    weights: &[f64],
    cfg: &ClassifierConfig,
) -> Result<f64> {
    let preds = predictions(mapped, consequents);
    let mut total = 0.0;
    for v in 0..mapped.len() {
        let target = alignment_target(&preds, v, cfg.alignment);
        total += weights[v] * frob_sq(&(&preds[v] - y))
            + cfg.beta * frob_sq(&(&preds[v] - target))
            + cfg.delta * frob_sq(&consequents[v]);
    }
    total += entropy_term(weights, cfg.gamma);
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::Divergence(format!("classifier objective is {total}")))
    }
}

/// Alternating consequent/weight updates on already-mapped views, starting
/// from zero consequents and uniform weights.
pub fn fit_mapped(
    mapped: &[DMatrix<f64>],
    y: &DMatrix<f64>,
    cfg: &ClassifierConfig,
) -> Result<(Vec<DMatrix<f64>>, Vec<f64>, usize, Vec<f64>)> {
    cfg.validate()?;
    if mapped.is_empty() {
        return Err(Error::invalid("no views to train on"));
    }
    for (v, x) in mapped.iter().enumerate() {
        if x.nrows() != y.nrows() {
            return Err(Error::dim(format!(
                "view {v} has {} rows, labels have {}",
                x.nrows(),
                y.nrows()
            )));
        }
    }
    let n_views = mapped.len();
    let mut consequents: Vec<DMatrix<f64>> = mapped
        .iter()
        .map(|x| DMatrix::zeros(x.ncols(), y.ncols()))
        .collect();
    let mut weights = vec![1.0 / n_views as f64; n_views];
    let mut trace = Vec::new();
    let mut sweeps = 0;
    for _ in 0..cfg.max_iters {
        let change = update_consequents(mapped, y, &mut consequents, &weights, cfg)?;
        weights = update_weights(mapped, y, &consequents, cfg);
        sweeps += 1;
        trace.push(objective(mapped, y, &consequents, &weights, cfg)?);
        if change < cfg.tol {
            break;
        }
    }
    Ok((consequents, weights, sweeps, trace))
}

/// Builds the fuzzy views from a trained representation and fits the
/// cooperative ensemble against `labels`.
pub fn fit(drl: &DrlModel, labels: &[usize], n_classes: usize, cfg: &ClassifierConfig) -> Result<ViewEnsemble> {
    cfg.validate()?;
    if labels.len() != drl.n_instances() {
        return Err(Error::dim(format!(
            "{} labels for {} instances",
            labels.len(),
            drl.n_instances()
        )));
    }
    let y = one_hot(labels, n_classes)?;
    let designs = assemble_views(drl, cfg);
    let mut antecedents = Vec::with_capacity(designs.len());
    let mut mapped = Vec::with_capacity(designs.len());
    for (_, x) in &designs {
        let ant = estimate_antecedent(x, cfg.rules, cfg.width_scale, cfg.width_floor)?;
        mapped.push(fuzzy_map(x, &ant)?);
        antecedents.push(ant);
    }
    let (consequents, weights, sweeps, objective_trace) = fit_mapped(&mapped, &y, cfg)?;
    let views = designs
        .into_iter()
        .zip(antecedents)
        .zip(consequents)
        .map(|(((role, _), antecedent), consequent)| FuzzyView {
            role,
            antecedent,
            consequent,
        })
        .collect();
    Ok(ViewEnsemble {
        config: cfg.clone(),
        n_classes,
        views,
        weights,
        sweeps,
        objective_trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `N x C` weighted ensemble scores.
    pub scores: DMatrix<f64>,
    pub labels: Vec<usize>,
}

/// Row-wise argmax, ties to the lowest class index.
pub fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &s) in row.iter().enumerate() {
                if s > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

impl ViewEnsemble {
    /// Maps the representation's design matrices through the trained
    /// antecedents.
    pub fn map_views(&self, drl: &DrlModel) -> Result<Vec<DMatrix<f64>>> {
        let designs = assemble_views(drl, &self.config);
        if designs.len() != self.views.len() {
            return Err(Error::dim(format!(
                "ensemble has {} views, representation yields {}",
                self.views.len(),
                designs.len()
            )));
        }
        designs
            .iter()
            .zip(&self.views)
            .map(|((role, x), view)| {
                if *role != view.role {
                    return Err(Error::dim(format!(
                        "view role mismatch: expected {}, got {}",
                        view.role.name(),
                        role.name()
                    )));
                }
                fuzzy_map(x, &view.antecedent).map_err(|e| {
                    Error::dim(format!("view '{}': {e}", view.role.name()))
                })
            })
            .collect()
    }

    /// Per-view unweighted scores `X_v P_v`.
    pub fn view_scores(&self, mapped: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        mapped
            .iter()
            .zip(&self.views)
            .map(|(x, view)| crate::fuzzy::tsk_output(x, &view.consequent))
            .collect()
    }

    pub fn predict_mapped(&self, mapped: &[DMatrix<f64>]) -> Result<Prediction> {
        let per_view = self.view_scores(mapped)?;
        let n = per_view.first().map_or(0, |s| s.nrows());
        let mut scores = DMatrix::zeros(n, self.n_classes);
        for (s, &w) in per_view.iter().zip(&self.weights) {
            scores += w * s;
        }
        let labels = argmax_rows(&scores);
        Ok(Prediction { scores, labels })
    }

    /// Weighted ensemble output for a (transformed) representation.
    pub fn predict(&self, drl: &DrlModel) -> Result<Prediction> {
        self.predict_mapped(&self.map_views(drl)?)
    }

    pub fn view_index(&self, name: &str) -> Option<usize> {
        self.views.iter().position(|v| v.role.name() == name)
    }
}
