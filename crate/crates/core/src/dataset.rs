//! Incomplete multi-view datasets: loading, normalization, masking, splitting
//! and a planted-factor synthetic generator.
//!
//! Missing rows are stored zero-filled. Anything doing arithmetic on a view
//! must go through its presence flags (or [`IndicatorMatrix`]) rather than
//! trusting the zeros.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One view: an `N x d` feature block plus per-instance presence flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewBlock {
    pub name: String,
    pub data: DMatrix<f64>,
    pub present: Vec<bool>,
}

impl ViewBlock {
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn indicator(&self) -> IndicatorMatrix {
        IndicatorMatrix {
            missing: self.present.iter().map(|p| !p).collect(),
        }
    }

    pub fn n_present(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }
}

/// Diagonal 0/1 indicator of missing instances for one view (1 = missing).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    pub missing: Vec<bool>,
}

impl IndicatorMatrix {
    pub fn missing_indices(&self) -> Vec<usize> {
        self.missing
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        !self.missing.iter().any(|&m| m)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.missing.len();
        DMatrix::from_fn(n, n, |i, j| if i == j && self.missing[i] { 1.0 } else { 0.0 })
    }
}

/// `V` views over the same `N` instances with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub views: Vec<ViewBlock>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl MultiViewDataset {
    /// Validates the dataset invariants and zero-fills missing rows.
    pub fn new(mut views: Vec<ViewBlock>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::invalid("dataset needs at least one view"));
        }
        let n = labels.len();
        for view in &mut views {
            if view.data.nrows() != n || view.present.len() != n {
                return Err(Error::dim(format!(
                    "view '{}' has {} rows and {} presence flags, expected {n}",
                    view.name,
                    view.data.nrows(),
                    view.present.len()
                )));
            }
            if view.data.ncols() == 0 {
                return Err(Error::dim(format!("view '{}' has zero features", view.name)));
            }
            for (i, &p) in view.present.iter().enumerate() {
                if !p {
                    view.data.row_mut(i).fill(0.0);
                }
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        for i in 0..n {
            if !views.iter().any(|v| v.present[i]) {
                return Err(Error::NoObservedView { instance: i });
            }
        }
        Ok(Self {
            views,
            labels,
            n_classes,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(ViewBlock::dim).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.views.iter().all(|v| v.present.iter().all(|&p| p))
    }

    /// Presence mask as an `N x V` matrix of flags.
    pub fn presence(&self) -> Vec<Vec<bool>> {
        (0..self.n_instances())
            .map(|i| self.views.iter().map(|v| v.present[i]).collect())
            .collect()
    }

    /// Rows `idx` (in the given order) as a new dataset.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let views = self
            .views
            .iter()
            .map(|v| ViewBlock {
                name: v.name.clone(),
                data: v.data.select_rows(idx.iter()),
                present: idx.iter().map(|&i| v.present[i]).collect(),
            })
            .collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self::new(views, labels, self.n_classes)
    }
}

// ---------------------------------------------------------------------------
// Manifest I/O

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestView {
    pub name: String,
    pub file: String,
    pub dim: usize,
}

/// On-disk entry point: per-view CSVs, a labels CSV and an optional mask CSV.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub views: Vec<ManifestView>,
    pub labels: String,
    #[serde(default)]
    pub mask: Option<String>,
    pub classes: usize,
}

fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            ),
            _ => Error::Csv(e),
        })?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("row {r}, column {c}: non-numeric cell '{cell}'"),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn resolve(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads a dataset from a JSON manifest. Relative paths resolve against the
/// manifest's directory.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<MultiViewDataset> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let label_path = resolve(base, &manifest.labels);
    let labels_raw = read_numeric_csv(&label_path)?;
    let mut labels = Vec::with_capacity(labels_raw.len());
    for (i, row) in labels_raw.iter().enumerate() {
        let value = match row.as_slice() {
            [v] if *v >= 0.0 && v.fract() == 0.0 => *v as usize,
            _ => {
                return Err(Error::Parse {
                    path: label_path.clone(),
                    message: format!("row {i}: expected one non-negative integer label"),
                })
            }
        };
        labels.push(value);
    }
    let n = labels.len();

    let mask = match &manifest.mask {
        Some(file) => {
            let mask_path = resolve(base, file);
            let rows = read_numeric_csv(&mask_path)?;
            if rows.len() != n {
                return Err(Error::dim(format!(
                    "mask has {} rows but labels have {n}",
                    rows.len()
                )));
            }
            let mut out = Vec::with_capacity(n);
            for (i, row) in rows.iter().enumerate() {
                if row.len() != manifest.views.len() {
                    return Err(Error::dim(format!(
                        "mask row {i} has {} columns, expected {}",
                        row.len(),
                        manifest.views.len()
                    )));
                }
                let flags = row
                    .iter()
                    .map(|&v| match v {
                        v if v == 1.0 => Ok(true),
                        v if v == 0.0 => Ok(false),
                        other => Err(Error::Parse {
                            path: mask_path.clone(),
                            message: format!("row {i}: mask entry {other} is not 0 or 1"),
                        }),
                    })
                    .collect::<Result<Vec<bool>>>()?;
                out.push(flags);
            }
            Some(out)
        }
        None => None,
    };

    let mut views = Vec::with_capacity(manifest.views.len());
    for (v, mv) in manifest.views.iter().enumerate() {
        let path = resolve(base, &mv.file);
        let rows = read_numeric_csv(&path)?;
        if rows.len() != n {
            return Err(Error::dim(format!(
                "view '{}' has {} rows but labels have {n}",
                mv.name,
                rows.len()
            )));
        }
        let mut data = DMatrix::zeros(n, mv.dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != mv.dim {
                return Err(Error::dim(format!(
                    "view '{}' row {i} has {} columns, manifest says {}",
                    mv.name,
                    row.len(),
                    mv.dim
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                data[(i, j)] = x;
            }
        }
        let present = match &mask {
            Some(m) => m.iter().map(|row| row[v]).collect(),
            None => vec![true; n],
        };
        views.push(ViewBlock {
            name: mv.name.clone(),
            data,
            present,
        });
    }
    MultiViewDataset::new(views, labels, manifest.classes)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `ds` as `<stem>_<view>.csv`, `<stem>_labels.csv`, `<stem>_mask.csv`
/// and `<stem>.json` under `dir`. Returns the manifest path.
pub fn save_dataset(ds: &MultiViewDataset, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest_views = Vec::new();
    for (v, view) in ds.views.iter().enumerate() {
        let file = format!("{stem}_view{v}.csv");
        let mut text = (0..view.dim())
            .map(|j| format!("f{j}"))
            .collect::<Vec<_>>()
            .join(",");
        text.push('\n');
        for row in view.data.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        write_text(&dir.join(&file), &text)?;
        manifest_views.push(ManifestView {
            name: view.name.clone(),
            file,
            dim: view.dim(),
        });
    }
    let labels_file = format!("{stem}_labels.csv");
    let mut text = String::from("label\n");
    for l in &ds.labels {
        text.push_str(&format!("{l}\n"));
    }
    write_text(&dir.join(&labels_file), &text)?;

    let mask_file = format!("{stem}_mask.csv");
    let mut text = ds
        .views
        .iter()
        .map(|v| v.name.clone())
        .collect::<Vec<_>>()
        .join(",");
    text.push('\n');
    for row in ds.presence() {
        let cells: Vec<&str> = row.iter().map(|&p| if p { "1" } else { "0" }).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write_text(&dir.join(&mask_file), &text)?;

    let manifest = Manifest {
        views: manifest_views,
        labels: labels_file,
        mask: Some(mask_file),
        classes: ds.n_classes,
    };
    let path = dir.join(format!("{stem}.json"));
    write_text(&path, &serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Normalization

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FeatureRange {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Per-view, per-feature min/max over observed training rows.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NormalizationStats {
    pub views: Vec<FeatureRange>,
}

pub fn fit_normalizer(ds: &MultiViewDataset) -> Result<NormalizationStats> {
    let mut views = Vec::with_capacity(ds.n_views());
    for view in &ds.views {
        let d = view.dim();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        let mut seen = false;
        for (i, _) in view.present.iter().enumerate().filter(|(_, &p)| p) {
            seen = true;
            for j in 0..d {
                let x = view.data[(i, j)];
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        if !seen {
            return Err(Error::invalid(format!(
                "view '{}' has no observed rows to normalize from",
                view.name
            )));
        }
        views.push(FeatureRange { min, max });
    }
    Ok(NormalizationStats { views })
}

impl NormalizationStats {
    fn check(&self, ds: &MultiViewDataset) -> Result<()> {
        if self.views.len() != ds.n_views() {
            return Err(Error::dim(format!(
                "normalizer covers {} views, dataset has {}",
                self.views.len(),
                ds.n_views()
            )));
        }
        for (range, view) in self.views.iter().zip(&ds.views) {
            if range.min.len() != view.dim() {
                return Err(Error::dim(format!(
                    "view '{}': expected {} features, got {}",
                    view.name,
                    range.min.len(),
                    view.dim()
                )));
            }
        }
        Ok(())
    }

    /// Maps observed entries back to the original scale. Constant features
    /// return their single training value.
    pub fn denormalize(&self, ds: &MultiViewDataset) -> Result<MultiViewDataset> {
        self.check(ds)?;
        let mut out = ds.clone();
        for (range, view) in self.views.iter().zip(&mut out.views) {
            for i in 0..view.data.nrows() {
                if !view.present[i] {
                    continue;
                }
                for j in 0..view.dim() {
                    let span = range.max[j] - range.min[j];
                    view.data[(i, j)] = if span > 0.0 {
                        range.min[j] + view.data[(i, j)] * span
                    } else {
                        range.min[j]
                    };
                }
            }
        }
        Ok(out)
    }
}

/// Min-max scales observed entries into `[0, 1]` (clamped); constant features
/// map to 0.5 and missing rows stay zero.
pub fn apply_normalizer(ds: &MultiViewDataset, stats: &NormalizationStats) -> Result<MultiViewDataset> {
    stats.check(ds)?;
    let mut out = ds.clone();
    for (range, view) in stats.views.iter().zip(&mut out.views) {
        for i in 0..view.data.nrows() {
            if !view.present[i] {
                continue;
            }
            for j in 0..view.dim() {
                let span = range.max[j] - range.min[j];
                view.data[(i, j)] = if span > 0.0 {
                    ((view.data[(i, j)] - range.min[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.5
                };
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Masking and splitting

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("missing rate {rate} outside [0, 1)")));
    }
    Ok(())
}

/// Draws the per-view removals before repair: for each view, `floor(rate * N)`
/// currently observed instances (fewer if not enough are observed) become
/// missing. Returns the new presence flags indexed `[view][instance]`.
pub(crate) fn draw_mask(ds: &MultiViewDataset, rate: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
    let n = ds.n_instances();
    let remove = (rate * n as f64).floor() as usize;
    ds.views
        .iter()
        .map(|view| {
            let observed: Vec<usize> = (0..n).filter(|&i| view.present[i]).collect();
            let take = remove.min(observed.len());
            let mut present = view.present.clone();
            for pick in index::sample(rng, observed.len(), take).into_iter() {
                present[observed[pick]] = false;
            }
            present
        })
        .collect()
}

/// Removes a `rate` fraction of instances from each view independently, then
/// restores one randomly chosen originally-observed view for every instance
/// that lost all of them.
pub fn apply_mask(ds: &MultiViewDataset, rate: f64, seed: u64) -> Result<MultiViewDataset> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(ds.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut present = draw_mask(ds, rate, &mut rng);
    for i in 0..ds.n_instances() {
        if present.iter().any(|p| p[i]) {
            continue;
        }
        let candidates: Vec<usize> = (0..ds.n_views())
            .filter(|&v| ds.views[v].present[i])
            .collect();
        let v = candidates[rng.random_range(0..candidates.len())];
        present[v][i] = true;
    }
    let views = ds
        .views
        .iter()
        .zip(present)
        .map(|(view, present)| ViewBlock {
            name: view.name.clone(),
            data: view.data.clone(),
            present,
        })
        .collect();
    MultiViewDataset::new(views, ds.labels.clone(), ds.n_classes)
}

/// Splits into disjoint `(train, test)` sets; the stratified variant keeps
/// each class's test share within one instance of `test_fraction`.
pub fn split_train_test(
    ds: &MultiViewDataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(MultiViewDataset, MultiViewDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n = ds.n_instances();
    if n < 2 {
        return Err(Error::invalid("cannot split fewer than 2 instances"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if stratified {
        for class in 0..ds.n_classes {
            let mut members: Vec<usize> = (0..n).filter(|&i| ds.labels[i] == class).collect();
            if members.is_empty() {
                continue;
            }
            if members.len() < 2 {
                return Err(Error::invalid(format!(
                    "class {class} has fewer than 2 instances; cannot stratify"
                )));
            }
            members.shuffle(&mut rng);
            let k = ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1);
            test.extend_from_slice(&members[..k]);
            train.extend_from_slice(&members[k..]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let k = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        test.extend_from_slice(&all[..k]);
        train.extend_from_slice(&all[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

/// One-hot label matrix `Y` (`N x C`).
pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<DMatrix<f64>> {
    let mut y = DMatrix::zeros(labels.len(), n_classes);
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::invalid(format!(
                "label {l} at row {i} out of range for {n_classes} classes"
            )));
        }
        y[(i, l)] = 1.0;
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Parameters for the planted common/specific factor generator.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub dims: Vec<usize>,
    pub latent_dim: usize,
    pub noise_sd: f64,
    pub class_sep: f64,
    #[serde(default = "default_classes")]
    pub n_classes: usize,
    pub seed: u64,
}

fn default_classes() -> usize {
    2
}

/// Generates `X^v = H_s^vᵀ B_s^v + H_cᵀ B_c^v + noise` where the columns of
/// `H_c` are drawn around class-specific means `class_sep * u_c`
/// (`u_c` random unit vectors). Fully observed.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<MultiViewDataset> {
    let m = cfg.latent_dim;
    if m == 0 {
        return Err(Error::invalid("latent dimension must be at least 1"));
    }
    if cfg.dims.is_empty() {
        return Err(Error::invalid("need at least one view"));
    }
    if let Some(&d) = cfg.dims.iter().find(|&&d| d < m) {
        return Err(Error::invalid(format!(
            "view dimension {d} smaller than latent dimension {m}"
        )));
    }
    if cfg.n_classes == 0 || cfg.n < cfg.n_classes {
        return Err(Error::invalid("need at least one instance per class"));
    }
    if cfg.noise_sd < 0.0 {
        return Err(Error::invalid("noise standard deviation must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let prototypes: Vec<Vec<f64>> = (0..cfg.n_classes)
        .map(|_| {
            let u: Vec<f64> = (0..m).map(|_| normal(&mut rng)).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            u.into_iter().map(|x| x / norm).collect()
        })
        .collect();

    let mut labels: Vec<usize> = (0..cfg.n).map(|i| i % cfg.n_classes).collect();
    labels.shuffle(&mut rng);

    let common = DMatrix::from_fn(m, cfg.n, |r, i| {
        cfg.class_sep * prototypes[labels[i]][r]
    }) + DMatrix::from_fn(m, cfg.n, |_, _| normal(&mut rng));

    let mut views = Vec::with_capacity(cfg.dims.len());
    for (v, &d) in cfg.dims.iter().enumerate() {
        let specific = DMatrix::from_fn(m, cfg.n, |_, _| normal(&mut rng));
        let specific_basis = DMatrix::from_fn(m, d, |_, _| normal(&mut rng));
        let common_basis = DMatrix::from_fn(m, d, |_, _| normal(&mut rng));
        let mut data = specific.transpose() * specific_basis + common.transpose() * common_basis;
        if cfg.noise_sd > 0.0 {
            for x in data.iter_mut() {
                *x += cfg.noise_sd * normal(&mut rng);
            }
        }
        views.push(ViewBlock {
            name: format!("view{v}"),
            data,
            present: vec![true; cfg.n],
        });
    }
    MultiViewDataset::new(views, labels, cfg.n_classes)
}
