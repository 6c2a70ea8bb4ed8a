#![allow(dead_code)]

use drimv::dataset::{
    apply_mask, apply_normalizer, fit_normalizer, gen_synthetic, MultiViewDataset, NormalizationStats,
    SyntheticConfig,
};
use drimv::representation::DrlConfig;
use nalgebra::DMatrix;

pub fn planted_config(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n: 200,
        dims: vec![20, 15, 10],
        latent_dim: 4,
        noise_sd: 0.01,
        class_sep: 6.0,
        n_classes: 2,
        seed,
    }
}

pub fn planted(seed: u64) -> MultiViewDataset {
    gen_synthetic(&planted_config(seed)).unwrap()
}

/// Masked copy plus both versions normalized with the masked data's ranges.
pub struct MaskedPair {
    pub masked: MultiViewDataset,
    pub truth: MultiViewDataset,
    pub stats: NormalizationStats,
}

pub fn mask_and_normalize(full: &MultiViewDataset, rate: f64, seed: u64) -> MaskedPair {
    let masked = apply_mask(full, rate, seed).unwrap();
    let stats = fit_normalizer(&masked).unwrap();
    MaskedPair {
        masked: apply_normalizer(&masked, &stats).unwrap(),
        truth: apply_normalizer(full, &stats).unwrap(),
        stats,
    }
}

/// RMSE over the entries of rows missing in `masked`.
pub fn imputed_rmse(masked: &MultiViewDataset, truth: &MultiViewDataset, imputed: &[DMatrix<f64>]) -> f64 {
    let (mut se, mut count) = (0.0, 0usize);
    for (v, view) in masked.views.iter().enumerate() {
        for i in (0..view.present.len()).filter(|&i| !view.present[i]) {
            for j in 0..view.dim() {
                se += (imputed[v][(i, j)] - truth.views[v].data[(i, j)]).powi(2);
                count += 1;
            }
        }
    }
    (se / count as f64).sqrt()
}

/// Representation settings used on the planted data: latent dimension equal
/// to the planted one, no orthogonality penalty and light graph smoothing.
pub fn planted_drl() -> DrlConfig {
    DrlConfig {
        latent_dim: 4,
        lambda1: 0.0,
        lambda2: 0.03125,
        lambda3: 0.0,
        max_iters: 100,
        ..DrlConfig::default()
    }
}

/// Classifier settings for the planted data: the largest grid temperature,
/// so the view weights stay spread instead of collapsing on one view.
pub fn planted_classifier() -> drimv::classifier::ClassifierConfig {
    drimv::classifier::ClassifierConfig {
        gamma: 32.0,
        ..Default::default()
    }
}
