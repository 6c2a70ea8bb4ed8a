mod common;

use common::{mask_and_normalize, planted_drl};
use drimv::classifier::fit;
use drimv::dataset::gen_synthetic;
use drimv::metrics::accuracy;
use drimv::representation;

fn separable(seed: u64, class_sep: f64) -> drimv::dataset::MultiViewDataset {
    let mut cfg = common::planted_config(seed);
    cfg.n = 120;
    cfg.class_sep = class_sep;
    gen_synthetic(&cfg).unwrap()
}

#[test]
fn separable_half_masked_data_is_learned() {
    let pair = mask_and_normalize(&separable(21, 20.0), 0.5, 22);
    let drl = representation::fit(&pair.masked, &planted_drl()).unwrap();
    let ensemble = fit(&drl, &pair.masked.labels, 2, &common::planted_classifier()).unwrap();
    let train = ensemble.predict(&drl).unwrap();
    let acc = accuracy(&pair.masked.labels, &train.labels).unwrap();
    assert!(acc >= 0.95, "training accuracy {acc}");
    let sum: f64 = ensemble.weights.iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);
    assert_eq!(ensemble.weights.len(), 5);
}

#[test]
fn training_data_through_transform_keeps_labels() {
    // Re-learning the missing rows at transform time lands on a different
    // imputation than training did, so this needs a wider margin than the
    // training-accuracy check.
    let pair = mask_and_normalize(&separable(25, 40.0), 0.5, 26);
    let drl = representation::fit(&pair.masked, &planted_drl()).unwrap();
    let ensemble = fit(&drl, &pair.masked.labels, 2, &common::planted_classifier()).unwrap();
    let again = ensemble.predict(&representation::transform(&drl, &pair.masked).unwrap()).unwrap();
    let acc = accuracy(&pair.masked.labels, &again.labels).unwrap();
    assert!(acc >= 0.95, "accuracy {acc}");
}

#[test]
fn identical_runs_give_identical_ensembles() {
    let pair = mask_and_normalize(&separable(25, 20.0), 0.3, 26);
    let drl = representation::fit(&pair.masked, &representation::DrlConfig { max_iters: 20, ..planted_drl() }).unwrap();
    let cfg = common::planted_classifier();
    let a = fit(&drl, &pair.masked.labels, 2, &cfg).unwrap();
    let b = fit(&drl, &pair.masked.labels, 2, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
