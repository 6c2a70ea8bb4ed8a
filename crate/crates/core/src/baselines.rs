//! Reference imputers: column means, k-nearest-neighbor donors and
//! singular value thresholding over the concatenated views.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{MultiViewDataset, ViewBlock};
use crate::error::{Error, Result};
use crate::linalg::masked_column_means;

/// A dataset with every missing row filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedDataset {
    /// Fully observed copy; originally present entries are untouched.
    pub dataset: MultiViewDataset,
    /// `[view][instance]`, true where the row was filled in.
    pub imputed: Vec<Vec<bool>>,
    /// `(view, instance)` rows that fell back to the column mean.
    pub fallback: Vec<(usize, usize)>,
}

impl ImputedDataset {
    pub fn n_imputed_rows(&self) -> usize {
        self.imputed.iter().flatten().filter(|&&m| m).count()
    }
}

fn filled(ds: &MultiViewDataset, data: Vec<DMatrix<f64>>, fallback: Vec<(usize, usize)>) -> Result<ImputedDataset> {
    let imputed = ds.views.iter().map(|v| v.present.iter().map(|p| !p).collect()).collect();
    let views = ds
        .views
        .iter()
        .zip(data)
        .map(|(v, data)| ViewBlock {
            name: v.name.clone(),
            data,
            present: vec![true; ds.n_instances()],
        })
        .collect();
    Ok(ImputedDataset {
        dataset: MultiViewDataset::new(views, ds.labels.clone(), ds.n_classes)?,
        imputed,
        fallback,
    })
}

fn view_means(ds: &MultiViewDataset) -> Result<Vec<Vec<f64>>> {
    ds.views
        .iter()
        .map(|v| {
            masked_column_means(&v.data, &v.present)
                .ok_or_else(|| Error::invalid(format!("view '{}' has no present rows", v.name)))
        })
        .collect()
}

/// Fills each missing row with the column means of the view's present rows.
pub fn mean_impute(ds: &MultiViewDataset) -> Result<ImputedDataset> {
    let means = view_means(ds)?;
    let data = ds
        .views
        .iter()
        .zip(&means)
        .map(|(view, mean)| {
            let mut data = view.data.clone();
            for (i, &p) in view.present.iter().enumerate() {
                if !p {
                    for (j, &m) in mean.iter().enumerate() {
                        data[(i, j)] = m;
                    }
                }
            }
            data
        })
        .collect();
    filled(ds, data, Vec::new())
}

/// Fills a missing row of view `v` with the mean of its `k` nearest donors
/// (instances present in `v`). Distances use the views both instances have,
/// concatenated; ties go to the lower donor index. Rows with no donor sharing
/// a view fall back to the column mean.
pub fn knn_impute(ds: &MultiViewDataset, k: usize) -> Result<ImputedDataset> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let means = view_means(ds)?;
    let n = ds.n_instances();
    let mut fallback = Vec::new();
    let mut data = Vec::with_capacity(ds.n_views());
    for (v, view) in ds.views.iter().enumerate() {
        let mut out = view.data.clone();
        let donors: Vec<usize> = (0..n).filter(|&j| view.present[j]).collect();
        for i in (0..n).filter(|&i| !view.present[i]) {
            let mut ranked: Vec<(f64, usize)> = donors
                .iter()
                .filter_map(|&j| {
                    let mut shared = false;
                    let mut sq = 0.0;
                    for (s, other) in ds.views.iter().enumerate() {
                        if s == v || !other.present[i] || !other.present[j] {
                            continue;
                        }
                        shared = true;
                        sq += (other.data.row(i) - other.data.row(j)).norm_squared();
                    }
                    shared.then_some((sq, j))
                })
                .collect();
            if ranked.is_empty() {
                fallback.push((v, i));
                for (c, &m) in means[v].iter().enumerate() {
                    out[(i, c)] = m;
                }
                continue;
            }
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            ranked.truncate(k);
            let mut row = nalgebra::RowDVector::zeros(view.dim());
            for &(_, j) in &ranked {
                row += view.data.row(j);
            }
            out.set_row(i, &(row / ranked.len() as f64));
        }
        data.push(out);
    }
    filled(ds, data, fallback)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvtConfig {
    /// Singular value threshold; `None` uses `5 sqrt(N D)`.
    pub tau: Option<f64>,
    /// Dual step size; `None` uses `1.2 N D / |Ω|`.
    pub step: Option<f64>,
    pub max_iters: usize,
    /// Stop when `‖P_Ω(X − M)‖ / ‖P_Ω(M)‖` drops below this.
    pub tol: f64,
}

impl Default for SvtConfig {
    fn default() -> Self {
        Self {
            tau: None,
            step: None,
            max_iters: 2000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvtResult {
    pub completed: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn shrink(y: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let svd = y.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let s = svd.singular_values.map(|s| (s - tau).max(0.0));
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > 0.0).collect();
    if keep.is_empty() {
        return DMatrix::zeros(y.nrows(), y.ncols());
    }
    let mut us = u.select_columns(keep.iter());
    for (c, &i) in keep.iter().enumerate() {
        us.column_mut(c).scale_mut(s[i]);
    }
    us * vt.select_rows(keep.iter())
}

/// Singular value thresholding completion of `m` from the entries where
/// `observed` is true. Observed entries of the result are copied from `m`.
pub fn svt(m: &DMatrix<f64>, observed: &DMatrix<bool>, cfg: &SvtConfig) -> Result<SvtResult> {
    if m.shape() != observed.shape() {
        return Err(Error::dim(format!(
            "matrix is {:?}, mask is {:?}",
            m.shape(),
            observed.shape()
        )));
    }
    let total = m.len() as f64;
    let n_obs = observed.iter().filter(|&&o| o).count();
    if n_obs == 0 {
        return Err(Error::invalid("no observed entries"));
    }
    let tau = cfg.tau.unwrap_or(5.0 * total.sqrt());
    let step = cfg.step.unwrap_or(1.2 * total / n_obs as f64);
    if !(tau > 0.0) || !(step > 0.0) {
        return Err(Error::invalid("tau and step must be positive"));
    }
    let project = |x: &DMatrix<f64>| x.zip_map(observed, |v, o| if o { v } else { 0.0 });
    let target = project(m);
    let norm = target.norm();

    let finish = |mut x: DMatrix<f64>, iterations: usize, residual: f64| -> Result<SvtResult> {
        for ((xv, &mv), &o) in x.iter_mut().zip(m.iter()).zip(observed.iter()) {
            if o {
                *xv = mv;
            }
        }
        Ok(SvtResult {
            completed: x,
            iterations,
            residual,
        })
    };
    if n_obs == m.len() || norm == 0.0 {
        return finish(target, 0, 0.0);
    }

    let mut y = DMatrix::zeros(m.nrows(), m.ncols());
    let mut x = y.clone();
    let mut residual = f64::INFINITY;
    let mut growth = 0;
    let mut iterations = 0;
    for _ in 0..cfg.max_iters {
        iterations += 1;
        x = shrink(&y, tau);
        let gap = &target - project(&x);
        let r = gap.norm() / norm;
        if !r.is_finite() {
            return Err(Error::Divergence("SVT residual is not finite".into()));
        }
        growth = if r > residual { growth + 1 } else { 0 };
        residual = r;
        if growth >= 10 {
            return Err(Error::Divergence(format!(
                "SVT residual grew for 10 consecutive iterations (now {r:.3e})"
            )));
        }
        if r < cfg.tol {
            break;
        }
        y += step * gap;
    }
    finish(x, iterations, residual)
}

/// Completes the horizontally concatenated views with [`svt`]; a missing
/// view row counts as missing entries.
pub fn svt_complete(ds: &MultiViewDataset, cfg: &SvtConfig) -> Result<ImputedDataset> {
    let n = ds.n_instances();
    let total: usize = ds.dims().iter().sum();
    let mut m = DMatrix::zeros(n, total);
    let mut observed = DMatrix::from_element(n, total, false);
    let mut offset = 0;
    for view in &ds.views {
        let d = view.dim();
        m.view_mut((0, offset), (n, d)).copy_from(&view.data);
        for (i, &p) in view.present.iter().enumerate() {
            for j in 0..d {
                observed[(i, offset + j)] = p;
            }
        }
        offset += d;
    }
    let result = svt(&m, &observed, cfg)?;
    let mut offset = 0;
    let data = ds
        .views
        .iter()
        .map(|view| {
            let d = view.dim();
            let mut out = view.data.clone();
            for (i, &p) in view.present.iter().enumerate() {
                if !p {
                    out.row_mut(i).copy_from(&result.completed.view((i, offset), (1, d)));
                }
            }
            offset += d;
            out
        })
        .collect();
    filled(ds, data, Vec::new())
}
