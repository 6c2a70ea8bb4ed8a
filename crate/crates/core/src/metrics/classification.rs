use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(labels: &[usize], other: usize) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::invalid("empty label vector"));
    }
    if labels.len() != other {
        return Err(Error::dim(format!(
            "{} labels but {} predictions",
            labels.len(),
            other
        )));
    }
    Ok(())
}

pub fn accuracy(labels: &[usize], predictions: &[usize]) -> Result<f64> {
    check_pair(labels, predictions.len())?;
    let hits = labels.iter().zip(predictions).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Average {
    Binary { positive: usize },
    Macro,
}

impl F1Average {
    /// Binary with class 1 positive for two classes, macro otherwise.
    pub fn for_classes(n_classes: usize) -> Self {
        if n_classes > 2 {
            F1Average::Macro
        } else {
            F1Average::Binary { positive: 1 }
        }
    }
}

fn f1_for(labels: &[usize], predictions: &[usize], positive: usize) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y == positive, p == positive) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    // 2PR/(P+R) = 2TP/(2TP+FP+FN), and 0 when TP = 0
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

pub fn f1(labels: &[usize], predictions: &[usize], average: F1Average) -> Result<f64> {
    check_pair(labels, predictions.len())?;
    match average {
        F1Average::Binary { positive } => Ok(f1_for(labels, predictions, positive)),
        F1Average::Macro => {
            let n_classes = labels.iter().chain(predictions).max().map_or(0, |&m| m + 1);
            let total: f64 = (0..n_classes).map(|c| f1_for(labels, predictions, c)).sum();
            Ok(total / n_classes as f64)
        }
    }
}

/// Mann–Whitney AUC with average ranks on ties.
pub fn auc_binary(positive: &[bool], scores: &[f64]) -> Result<f64> {
    if positive.len() != scores.len() {
        return Err(Error::dim(format!(
            "{} labels but {} scores",
            positive.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both positive and negative instances"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[start..=end].iter().filter(|&&i| positive[i]).count() as f64;
        start = end + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// AUC from an `N x C` score matrix: the class-1 column for two classes,
/// otherwise the one-vs-rest macro average over classes that have both
/// positives and negatives.
pub fn auc(labels: &[usize], scores: &DMatrix<f64>) -> Result<f64> {
    check_pair(labels, scores.nrows())?;
    let c = scores.ncols();
    if c < 2 {
        return Err(Error::invalid("AUC needs at least two score columns"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::invalid(format!("label {bad} has no score column")));
    }
    let column = |k: usize| scores.column(k).iter().copied().collect::<Vec<f64>>();
    if c == 2 {
        let pos: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        return auc_binary(&pos, &column(1));
    }
    let mut values = Vec::new();
    for k in 0..c {
        let pos: Vec<bool> = labels.iter().map(|&l| l == k).collect();
        if pos.iter().any(|&p| p) && pos.iter().any(|&p| !p) {
            values.push(auc_binary(&pos, &column(k))?);
        }
    }
    if values.is_empty() {
        return Err(Error::invalid("AUC needs at least two classes present"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// ACC, AUC and F1 of one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub acc: f64,
    pub auc: f64,
    pub f1: f64,
}

impl MetricSummary {
    pub fn compute(labels: &[usize], predictions: &[usize], scores: &DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            acc: accuracy(labels, predictions)?,
            auc: auc(labels, scores)?,
            f1: f1(labels, predictions, F1Average::for_classes(scores.ncols()))?,
        })
    }
}

/// Per-repetition metrics with their mean and (sample) variance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub repetitions: Vec<MetricSummary>,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

impl MetricReport {
    pub fn push(&mut self, m: MetricSummary) {
        self.repetitions.push(m);
    }

    fn column(&self, pick: fn(&MetricSummary) -> f64) -> Vec<f64> {
        self.repetitions.iter().map(pick).collect()
    }

    pub fn acc(&self) -> (f64, f64) {
        mean_var(&self.column(|m| m.acc))
    }

    pub fn auc(&self) -> (f64, f64) {
        mean_var(&self.column(|m| m.auc))
    }

    pub fn f1(&self) -> (f64, f64) {
        mean_var(&self.column(|m| m.f1))
    }

    /// `mean±variance` with four decimals, e.g. `0.9471±0.0009`.
    pub fn format(stat: (f64, f64)) -> String {
        format!("{:.4}±{:.4}", stat.0, stat.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_and_f1_examples() {
        let y = [1, 1, 0, 0];
        assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
        assert_eq!(f1(&y, &y, F1Average::Binary { positive: 1 }).unwrap(), 1.0);
        assert_eq!(f1(&y, &[0, 0, 0, 0], F1Average::Binary { positive: 1 }).unwrap(), 0.0);
        let f = f1(&y, &[1, 0, 0, 0], F1Average::Binary { positive: 1 }).unwrap();
        // precision 1, recall 1/2
        let (p, r) = (1.0, 0.5);
        assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-15);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn macro_f1_averages_classes() {
        let y = [0, 1, 2, 2];
        let p = [0, 2, 2, 2];
        let expected = (1.0 + 0.0 + 0.8) / 3.0;
        assert!((f1(&y, &p, F1Average::Macro).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_binary(&[true, false, true, false], &[0.9, 0.8, 0.7, 0.1]).unwrap(), 0.75);
        assert_eq!(auc_binary(&[true, true, false, false], &[0.9, 0.8, 0.2, 0.1]).unwrap(), 1.0);
        assert_eq!(auc_binary(&[true, false, true], &[0.3, 0.3, 0.3]).unwrap(), 0.5);
        assert!(auc_binary(&[true, true], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn report_formatting() {
        let mut r = MetricReport::default();
        for acc in [0.9, 1.0] {
            r.push(MetricSummary { acc, auc: 1.0, f1: 1.0 });
        }
        assert_eq!(MetricReport::format(r.acc()), "0.9500±0.0050");
        assert_eq!(r.auc(), (1.0, 0.0));
    }

    fn brute_force(pos: &[bool], s: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if pos[i] && !pos[j] {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    proptest! {
        #[test]
        fn auc_matches_pair_counting(
            data in proptest::collection::vec((any::<bool>(), 0u8..6), 2..=12)
        ) {
            let pos: Vec<bool> = data.iter().map(|d| d.0).collect();
            let s: Vec<f64> = data.iter().map(|d| d.1 as f64 / 5.0).collect();
            prop_assume!(pos.iter().any(|&p| p) && pos.iter().any(|&p| !p));
            let a = auc_binary(&pos, &s).unwrap();
            prop_assert!((a - brute_force(&pos, &s)).abs() < 1e-12);
        }
    }
}
