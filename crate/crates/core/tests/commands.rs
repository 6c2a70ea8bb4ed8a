use std::path::Path;

use drimv::classifier::ClassifierConfig;
use drimv::commands::{
    cmd_bench, cmd_explain, cmd_predict, cmd_train, compute_stats, read_bench_rows, BenchRow, Metric, RunConfig,
    TrainedModel,
};
use drimv::dataset::{apply_mask, gen_synthetic, load_dataset, save_dataset, SyntheticConfig};
use drimv::representation::DrlConfig;

fn small_manifest(dir: &Path) -> std::path::PathBuf {
    let ds = gen_synthetic(&SyntheticConfig {
        n: 40,
        dims: vec![5, 4, 3],
        latent_dim: 2,
        noise_sd: 0.05,
        class_sep: 6.0,
        n_classes: 2,
        seed: 3,
    })
    .unwrap();
    save_dataset(&ds, dir, "small").unwrap()
}

fn quick_config() -> RunConfig {
    RunConfig {
        drl: DrlConfig { latent_dim: 2, neighbors: 3, max_iters: 10, ..DrlConfig::default() },
        classifier: ClassifierConfig { rules: 4, max_iters: 20, ..ClassifierConfig::default() },
        repetitions: 2,
        ..RunConfig::default()
    }
}

fn row(dataset: &str, rate: f64, value: f64) -> BenchRow {
    BenchRow { dataset: dataset.into(), rate, repetition: 0, seed: 0, acc: value, auc: value, f1: value }
}

#[test]
fn bench_without_missing_data_runs_complete_repetitions() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_manifest(dir.path());
    let cfg = RunConfig { rates: vec![0.0], ..quick_config() };
    let out = cmd_bench(&manifest, &cfg, &dir.path().join("bench")).unwrap();
    assert!(out.is_complete());
    assert_eq!(out.rows.len(), 2);
    assert_eq!(out.summary[0].completed, 2);
    assert_eq!(read_bench_rows(&dir.path().join("bench/results.csv")).unwrap(), out.rows);
}

#[test]
fn bench_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_manifest(dir.path());
    let cfg = RunConfig { rates: vec![0.1, 0.5, 0.7], ..quick_config() };
    let out = cmd_bench(&manifest, &cfg, &dir.path().join("bench")).unwrap();
    assert_eq!(out.rows.len() + out.failures.len(), 6);
    assert_eq!(out.rows.len(), 6);
    let summary = std::fs::read_to_string(dir.path().join("bench/summary.json")).unwrap();
    assert!(summary.contains('±'));
}

#[test]
fn identical_algorithms_are_not_distinguished() {
    let rows: Vec<BenchRow> = [0.1, 0.3, 0.5].iter().map(|&r| row("d", r, 0.8 + r / 10.0)).collect();
    let results = vec![("a".into(), rows.clone()), ("b".into(), rows.clone()), ("c".into(), rows)];
    let report = compute_stats(&results, "a", Metric::Auc).unwrap();
    assert!((report.friedman.p_value - 1.0).abs() < 1e-12);
    assert!(report.holm.comparisons.iter().all(|c| !c.reject));
}

#[test]
fn strictly_best_control_ranks_first() {
    let rates = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
    let build = |offset: f64| rates.iter().map(|&r| row("d", r, 0.5 + offset)).collect::<Vec<_>>();
    let results = vec![("ctl".into(), build(0.3)), ("x".into(), build(0.2)), ("y".into(), build(0.1))];
    let report = compute_stats(&results, "ctl", Metric::Acc).unwrap();
    assert_eq!(report.friedman.avg_ranks[0], 1.0);
}

#[test]
fn consistent_three_way_ordering_gives_chi_square_eight() {
    let settings = [("d1", 0.1), ("d1", 0.5), ("d2", 0.1), ("d2", 0.5)];
    let build = |v: f64| settings.iter().map(|&(d, r)| row(d, r, v)).collect::<Vec<_>>();
    let results = vec![("best".into(), build(0.9)), ("mid".into(), build(0.8)), ("worst".into(), build(0.7))];
    let report = compute_stats(&results, "best", Metric::Auc).unwrap();
    assert!((report.friedman.statistic - 8.0).abs() < 1e-12);
    assert!((report.friedman.p_value - (-4.0f64).exp()).abs() < 1e-12);
    let text = report.to_text();
    assert!(text.contains("chi2 = 8.000000"), "{text}");
    assert!(text.contains("p = 0.018316"), "{text}");
}

#[test]
fn misaligned_settings_are_rejected() {
    let results = vec![
        ("a".into(), vec![row("d", 0.1, 0.9)]),
        ("b".into(), vec![row("d", 0.3, 0.9)]),
    ];
    assert!(compute_stats(&results, "a", Metric::Auc).is_err());
}

#[test]
fn train_predict_and_explain_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_manifest(dir.path());
    let model_path = dir.path().join("model.json");
    let cfg = quick_config();
    let model = cmd_train(&manifest, &cfg, &model_path).unwrap();
    assert_eq!(model.ensemble.weights.len(), 5);
    assert!((model.ensemble.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let ds = load_dataset(&manifest).unwrap();
    let masked = apply_mask(&ds, 0.5, 1).unwrap();
    let masked_manifest = save_dataset(&masked, dir.path(), "masked").unwrap();
    let prediction = cmd_predict(&model_path, &masked_manifest, &dir.path().join("pred.csv")).unwrap();
    assert_eq!(prediction.labels.len(), ds.n_instances());
    let csv = std::fs::read_to_string(dir.path().join("pred.csv")).unwrap();
    assert_eq!(csv.lines().count(), ds.n_instances() + 1);

    let loaded = TrainedModel::load(&model_path).unwrap();
    let out = cmd_explain(&loaded, "view0", None, Some((&masked, 0))).unwrap();
    assert!(out.text.contains("the f0 is"));
    assert!(["Small", "Medium", "Little Large", "Large"].iter().any(|l| out.text.contains(l)));
    let trace = out.trace.unwrap();
    let score = out.view_score.unwrap();
    for (k, s) in score.iter().enumerate() {
        let sum: f64 = trace.contributions.iter().map(|c| c[k]).sum();
        assert!((sum - s).abs() <= 1e-12, "class {k}: {sum} vs {s}");
    }
    let err = cmd_explain(&loaded, "clinical", None, None).unwrap_err();
    assert!(err.to_string().contains("common"), "{err}");
}

#[test]
fn one_iteration_with_infinite_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_manifest(dir.path());
    let mut cfg = quick_config();
    cfg.drl.tol = f64::INFINITY;
    let model = cmd_train(&manifest, &cfg, &dir.path().join("m.json")).unwrap();
    assert_eq!(model.drl.objective_trace.len(), 1);
}

#[test]
fn wrong_view_width_names_view_and_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_manifest(dir.path());
    let model_path = dir.path().join("model.json");
    cmd_train(&manifest, &quick_config(), &model_path).unwrap();
    let other = gen_synthetic(&SyntheticConfig {
        n: 10,
        dims: vec![5, 6, 3],
        latent_dim: 2,
        noise_sd: 0.05,
        class_sep: 6.0,
        n_classes: 2,
        seed: 1,
    })
    .unwrap();
    let other_manifest = save_dataset(&other, dir.path().join("other"), "other").unwrap();
    let err = cmd_predict(&model_path, &other_manifest, &dir.path().join("p.csv")).unwrap_err().to_string();
    assert!(err.contains("view1") && err.contains('4') && err.contains('6'), "{err}");
}
