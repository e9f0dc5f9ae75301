//! Held-out evaluation metrics.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::boost::{Ensemble, OutputKind};
use crate::data::RawDataset;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Auc,
    /// `1 − AUC`.
    AucError,
    Mse,
    LogLoss,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Auc, Metric::AucError, Metric::Mse, Metric::LogLoss];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "auc",
            Metric::AucError => "1-auc",
            Metric::Mse => "mse",
            Metric::LogLoss => "logloss",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub values: BTreeMap<Metric, f64>,
    pub n_test: usize,
}

impl EvalReport {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.values.get(&metric).copied()
    }

    /// One `key=value` pair per line, `n_test` first.
    pub fn to_key_value(&self) -> String {
        let mut out = format!("n_test={}\n", self.n_test);
        for (m, v) in &self.values {
            out.push_str(&format!("{m}={v}\n"));
        }
        out
    }
}

/// Mann–Whitney AUC: the probability that a random positive outscores a
/// random negative, ties counted as one half.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[T]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            found: labels.len(),
            expected: scores.len(),
        });
    }
    if let Some(row) = labels.iter().position(|&y| y != T::zero() && y != T::one()) {
        return Err(Error::NonBinaryTarget {
            row,
            value: labels[row].as_f64(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y == T::one()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("roc_auc"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Count negative-below-positive pairs group by group of tied scores.
    let mut negatives_below = 0.0f64;
    let mut pairs = 0.0f64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let group_pos = order[start..end]
            .iter()
            .filter(|&&i| labels[i] == T::one())
            .count() as f64;
        let group_neg = (end - start) as f64 - group_pos;
        pairs += group_pos * (negatives_below + 0.5 * group_neg);
        negatives_below += group_neg;
        start = end;
    }
    Ok(pairs / (n_pos as f64 * n_neg as f64))
}

pub fn mean_squared_error<T: Scalar>(pred: &[T], targets: &[T]) -> f64 {
    let total: f64 = pred
        .iter()
        .zip(targets)
        .map(|(&p, &y)| (p.as_f64() - y.as_f64()).powi(2))
        .sum();
    total / targets.len().max(1) as f64
}

/// Predicts the test set once and computes each requested metric.
///
/// `mse` is taken on the model output scale: probabilities for a logloss
/// model, raw scores otherwise. `logloss` needs a logloss model.
pub fn evaluate<T: Scalar>(
    ensemble: &Ensemble<T>,
    test: &RawDataset<T>,
    metrics: &[Metric],
) -> Result<EvalReport> {
    let raw = ensemble.predict(test, OutputKind::Raw)?;
    let mut values = BTreeMap::new();
    for &metric in metrics {
        let v = match metric {
            Metric::Auc => roc_auc(&raw, &test.targets)?,
            Metric::AucError => 1.0 - roc_auc(&raw, &test.targets)?,
            Metric::Mse => {
                let out: Vec<T> = raw.iter().map(|&r| ensemble.loss.transform(r)).collect();
                mean_squared_error(&out, &test.targets)
            }
            Metric::LogLoss => {
                if ensemble.loss != LossKind::LogLoss {
                    return Err(Error::MetricNotApplicable {
                        metric: metric.name().to_string(),
                        reason: "model was not trained with logloss".into(),
                    });
                }
                test.check_binary_targets()?;
                let total: f64 = test
                    .targets
                    .iter()
                    .zip(&raw)
                    .map(|(&y, &r)| LossKind::LogLoss.value(y.as_f64(), r.as_f64()))
                    .sum();
                total / test.n_rows().max(1) as f64
            }
        };
        values.insert(metric, v);
    }
    Ok(EvalReport {
        values,
        n_test: test.n_rows(),
    })
}
