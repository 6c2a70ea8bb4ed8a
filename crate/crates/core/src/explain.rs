//! Linguistic readouts of a trained view: labels for each fuzzy set, IF-THEN
//! rule reports and per-rule decision traces.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classifier::{FuzzyView, ViewEnsemble};
use crate::error::{Error, Result};
use crate::fuzzy::{firing_strengths, rule_outputs, Antecedent};

/// Label vocabulary for `k` fuzzy sets per feature, smallest first.
pub fn default_vocabulary(k: usize) -> Vec<String> {
    let named: &[&str] = match k {
        2 => &["Small", "Large"],
        4 => &["Small", "Medium", "Little Large", "Large"],
        5 => &["Small", "Medium", "Little Large", "Large", "Very Large"],
        _ => &[],
    };
    if named.is_empty() {
        (1..=k).map(|i| format!("Level {i} of {k}")).collect()
    } else {
        named.iter().map(|s| s.to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticLabels {
    /// `[rule][feature]`
    pub labels: Vec<Vec<String>>,
    /// Features where two or more rules share a center.
    pub degenerate_features: Vec<usize>,
}

/// Ranks each feature's rule centers ascending and hands out `vocabulary`
/// in that order; equal centers are ordered by rule index.
pub fn linguistic_labels(ant: &Antecedent, vocabulary: &[String]) -> Result<LinguisticLabels> {
    let k = ant.n_rules();
    if vocabulary.len() != k {
        return Err(Error::invalid(format!(
            "vocabulary has {} labels for {k} rules",
            vocabulary.len()
        )));
    }
    let mut labels = vec![vec![String::new(); ant.n_features()]; k];
    let mut degenerate_features = Vec::new();
    for j in 0..ant.n_features() {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            ant.centers[(a, j)]
                .total_cmp(&ant.centers[(b, j)])
                .then(a.cmp(&b))
        });
        if order.windows(2).any(|w| ant.centers[(w[0], j)] == ant.centers[(w[1], j)]) {
            degenerate_features.push(j);
        }
        for (rank, &r) in order.iter().enumerate() {
            labels[r][j] = vocabulary[rank].clone();
        }
    }
    Ok(LinguisticLabels {
        labels,
        degenerate_features,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDescription {
    pub labels: Vec<String>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    /// `[class][0..=d]`: intercept followed by one slope per feature.
    pub consequent: Vec<Vec<f64>>,
}

/// IF-THEN description of every rule of one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticRuleSet {
    pub view: String,
    pub feature_names: Vec<String>,
    pub rules: Vec<RuleDescription>,
    pub degenerate_features: Vec<usize>,
}

fn view_of(ensemble: &ViewEnsemble, view: usize) -> Result<&FuzzyView> {
    ensemble.views.get(view).ok_or_else(|| {
        Error::invalid(format!(
            "view index {view} out of range for {} views",
            ensemble.views.len()
        ))
    })
}

/// Builds the rule report for view `view`. Without names, features are
/// called `f0 … f{d-1}`.
pub fn rule_report(ensemble: &ViewEnsemble, view: usize, feature_names: Option<&[String]>) -> Result<LinguisticRuleSet> {
    let fv = view_of(ensemble, view)?;
    let ant = &fv.antecedent;
    let d = ant.n_features();
    let feature_names: Vec<String> = match feature_names {
        Some(names) if names.len() != d => {
            return Err(Error::dim(format!(
                "view '{}' has {d} features but {} names were given",
                fv.role.name(),
                names.len()
            )))
        }
        Some(names) => names.to_vec(),
        None => (0..d).map(|j| format!("f{j}")).collect(),
    };
    let labels = linguistic_labels(ant, &default_vocabulary(ant.n_rules()))?;
    let p = &fv.consequent;
    let rules = (0..ant.n_rules())
        .map(|r| {
            let base = r * (1 + d);
            RuleDescription {
                labels: labels.labels[r].clone(),
                centers: ant.centers.row(r).iter().copied().collect(),
                widths: ant.widths.row(r).iter().copied().collect(),
                consequent: (0..p.ncols())
                    .map(|c| (0..=d).map(|j| p[(base + j, c)]).collect())
                    .collect(),
            }
        })
        .collect();
    Ok(LinguisticRuleSet {
        view: fv.role.name().to_string(),
        feature_names,
        rules,
        degenerate_features: labels.degenerate_features,
    })
}

fn affine(coefs: &[f64], names: &[String]) -> String {
    let mut out = format!("{:.4}", coefs[0]);
    for (c, name) in coefs[1..].iter().zip(names) {
        let sign = if c.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {:.4}x_{name}", c.abs());
    }
    out
}

impl LinguisticRuleSet {
    /// Plain-text report, one block per rule.
    pub fn to_text(&self) -> String {
        let mut out = format!("View: {}\n", self.view);
        for (r, rule) in self.rules.iter().enumerate() {
            let _ = writeln!(out, "\nRule {}", r + 1);
            let conds: Vec<String> = self
                .feature_names
                .iter()
                .zip(&rule.labels)
                .map(|(name, label)| format!("the {name} is {label}"))
                .collect();
            let _ = writeln!(out, "IF: {}", conds.join(" and, "));
            for (c, coefs) in rule.consequent.iter().enumerate() {
                let lead = if c == 0 { "THEN:" } else { "     " };
                let _ = writeln!(out, "{lead} the {}th output is {}", c + 1, affine(coefs, &self.feature_names));
            }
        }
        if !self.degenerate_features.is_empty() {
            let names: Vec<&str> = self
                .degenerate_features
                .iter()
                .map(|&j| self.feature_names[j].as_str())
                .collect();
            let _ = writeln!(out, "\nNote: tied centers on {}; labels follow rule order there.", names.join(", "));
        }
        out
    }
}

/// How each rule contributes to one view's output for one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub view: String,
    /// Normalized firing strengths `μ̃^k(x)`.
    pub firing: Vec<f64>,
    /// `[rule][class]` affine rule outputs `f_k(x)`.
    pub rule_outputs: Vec<Vec<f64>>,
    /// `[rule][class]`, `μ̃^k(x) f_k(x)`.
    pub contributions: Vec<Vec<f64>>,
    /// Sum of the contributions.
    pub combined: Vec<f64>,
    pub decision: usize,
    pub one_hot: Vec<f64>,
    /// Rule maximizing `μ̃^k(x) ‖f_k(x)‖`.
    pub dominant_rule: usize,
    /// Firing strengths fell back to uniform.
    pub firing_fallback: bool,
}

pub fn decision_trace(ensemble: &ViewEnsemble, view: usize, x: &[f64]) -> Result<DecisionTrace> {
    let fv = view_of(ensemble, view)?;
    let ant = &fv.antecedent;
    if x.len() != ant.n_features() {
        return Err(Error::dim(format!(
            "view '{}': expected {} features, got {}",
            fv.role.name(),
            ant.n_features(),
            x.len()
        )));
    }
    let outputs: DMatrix<f64> = rule_outputs(x, ant, &fv.consequent)?;
    let fs = firing_strengths(x, ant);
    let (k, c) = outputs.shape();
    let contributions: Vec<Vec<f64>> = (0..k)
        .map(|r| (0..c).map(|j| fs.normalized[r] * outputs[(r, j)]).collect())
        .collect();
    let combined: Vec<f64> = (0..c).map(|j| contributions.iter().map(|row| row[j]).sum()).collect();
    let decision = (0..c).fold(0, |best, j| if combined[j] > combined[best] { j } else { best });
    let strength: Vec<f64> = (0..k).map(|r| fs.normalized[r] * outputs.row(r).norm()).collect();
    let dominant_rule = (0..k).fold(0, |best, r| if strength[r] > strength[best] { r } else { best });
    Ok(DecisionTrace {
        view: fv.role.name().to_string(),
        firing: fs.normalized,
        rule_outputs: outputs.row_iter().map(|row| row.iter().copied().collect()).collect(),
        contributions,
        one_hot: (0..c).map(|j| if j == decision { 1.0 } else { 0.0 }).collect(),
        combined,
        decision,
        dominant_rule,
        firing_fallback: fs.fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{ClassifierConfig, ViewRole};

    fn ensemble(ant: Antecedent, consequent: DMatrix<f64>) -> ViewEnsemble {
        let c = consequent.ncols();
        ViewEnsemble {
            config: ClassifierConfig::default(),
            n_classes: c,
            views: vec![FuzzyView {
                role: ViewRole::Imputed { index: 0, name: "clinical".into() },
                antecedent: ant,
                consequent,
            }],
            weights: vec![1.0],
            sweeps: 0,
            objective_trace: vec![],
        }
    }

    fn single_feature(centers: &[f64], width: f64) -> Antecedent {
        Antecedent {
            centers: DMatrix::from_column_slice(centers.len(), 1, centers),
            widths: DMatrix::from_element(centers.len(), 1, width),
        }
    }

    #[test]
    fn age_centers_label_little_large() {
        let ant = single_feature(&[0.7332, 0.7780, 0.2635, 0.6699], 0.1);
        let l = linguistic_labels(&ant, &default_vocabulary(4)).unwrap();
        let got: Vec<&str> = l.labels.iter().map(|r| r[0].as_str()).collect();
        assert_eq!(got, vec!["Little Large", "Large", "Small", "Medium"]);
        assert!(l.degenerate_features.is_empty());
    }

    #[test]
    fn vocabularies() {
        assert_eq!(default_vocabulary(2), vec!["Small", "Large"]);
        assert_eq!(default_vocabulary(5)[4], "Very Large");
        assert_eq!(default_vocabulary(3), vec!["Level 1 of 3", "Level 2 of 3", "Level 3 of 3"]);
        let ant = single_feature(&[0.1, 0.9], 0.1);
        let l = linguistic_labels(&ant, &default_vocabulary(2)).unwrap();
        assert_eq!(l.labels, vec![vec!["Small".to_string()], vec!["Large".to_string()]]);
    }

    #[test]
    fn tied_centers_follow_rule_order() {
        let ant = single_feature(&[0.5, 0.5, 0.5, 0.5], 0.1);
        let l = linguistic_labels(&ant, &default_vocabulary(4)).unwrap();
        assert_eq!(l.labels[0][0], "Small");
        assert_eq!(l.labels[3][0], "Large");
        assert_eq!(l.degenerate_features, vec![0]);
    }

    #[test]
    fn labels_follow_centers_not_indices() {
        let a = single_feature(&[0.2, 0.8, 0.5], 0.1);
        let b = single_feature(&[0.8, 0.5, 0.2], 0.1);
        let vocab = default_vocabulary(3);
        let la = linguistic_labels(&a, &vocab).unwrap();
        let lb = linguistic_labels(&b, &vocab).unwrap();
        assert_eq!(la.labels[0], lb.labels[2]);
        assert_eq!(la.labels[1], lb.labels[0]);
    }

    #[test]
    fn planted_two_rule_report() {
        let ant = single_feature(&[0.1, 0.9], 0.05);
        // rule 1: 0.25 + 1.5x / -0.75 - 2x; rule 2: 1 - 0.5x / 0 + 0.125x
        let p = DMatrix::from_row_slice(4, 2, &[0.25, -0.75, 1.5, -2.0, 1.0, 0.0, -0.5, 0.125]);
        let e = ensemble(ant, p.clone());
        let names = vec!["age".to_string()];
        let report = rule_report(&e, 0, Some(&names)).unwrap();
        let text = report.to_text();
        assert!(text.contains("IF: the age is Small"));
        assert!(text.contains("THEN: the 1th output is 0.2500 + 1.5000x_age"));
        assert!(text.contains("the 2th output is -0.7500 - 2.0000x_age"));
        assert!(text.contains("the 1th output is 1.0000 - 0.5000x_age"));
        assert_eq!(report.rules[1].consequent[1], vec![0.0, 0.125]);

        let json = serde_json::to_string(&report).unwrap();
        let back: LinguisticRuleSet = serde_json::from_str(&json).unwrap();
        for (r, rule) in back.rules.iter().enumerate() {
            for (c, coefs) in rule.consequent.iter().enumerate() {
                for (j, &v) in coefs.iter().enumerate() {
                    assert_eq!(v.to_bits(), p[(r * 2 + j, c)].to_bits());
                }
            }
        }
        assert!(rule_report(&e, 0, Some(&[])).is_err());
        assert!(rule_report(&e, 3, None).is_err());
    }

    #[test]
    fn single_rule_report_and_trace() {
        let ant = Antecedent {
            centers: DMatrix::from_row_slice(1, 2, &[0.3, 0.6]),
            widths: DMatrix::from_element(1, 2, 0.2),
        };
        let p = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let e = ensemble(ant, p);
        let report = rule_report(&e, 0, None).unwrap();
        assert_eq!(report.rules[0].labels, vec!["Level 1 of 1", "Level 1 of 1"]);
        assert!(report.to_text().contains("x_f1"));
        let t = decision_trace(&e, 0, &[0.9, 0.2]).unwrap();
        assert_eq!(t.firing, vec![1.0]);
        assert_eq!(t.contributions[0], t.combined);
        assert_eq!(t.combined, t.rule_outputs[0]);
    }

    #[test]
    fn trace_at_center_is_dominated_by_that_rule() {
        let ant = Antecedent {
            centers: DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 5.0, 5.0, -5.0, 5.0]),
            widths: DMatrix::from_element(3, 2, 0.5),
        };
        let p = DMatrix::from_fn(9, 2, |i, j| 0.1 * (i as f64 + 1.0) - 0.3 * j as f64);
        let e = ensemble(ant, p);
        let t = decision_trace(&e, 0, &[5.0, 5.0]).unwrap();
        assert!(t.firing[1] > 0.9);
        assert_eq!(t.dominant_rule, 1);
        assert!((t.firing.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let x = DMatrix::from_row_slice(1, 2, &[5.0, 5.0]);
        let mapped = crate::fuzzy::fuzzy_map(&x, &e.views[0].antecedent).unwrap();
        let score = &mapped * &e.views[0].consequent;
        for c in 0..2 {
            assert!((score[(0, c)] - t.combined[c]).abs() < 1e-12);
        }
        assert_eq!(t.one_hot.iter().sum::<f64>(), 1.0);
        assert!(decision_trace(&e, 0, &[1.0]).is_err());
    }
}
