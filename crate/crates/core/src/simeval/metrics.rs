//! Confusion matrices and detection/diagnosis metrics.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction and truth lengths differ: {predictions} vs {truth}")]
    LengthMismatch { predictions: usize, truth: usize },

    #[error("sample ids misaligned at index {index}: {prediction} vs {truth}")]
    MisalignedSamples {
        index: usize,
        prediction: String,
        truth: String,
    },

    #[error("confusion matrix has no samples")]
    EmptyMatrix,
}

/// One labeled sample for binary detection; `class` optionally carries the
/// diagnosed category for the per-class matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLabel {
    pub sample_id: String,
    pub positive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
}

impl SampleLabel {
    pub fn new(sample_id: impl Into<String>, positive: bool) -> Self {
        Self {
            sample_id: sample_id.into(),
            positive,
            class: None,
        }
    }

    pub fn with_class(mut self, class: impl Into<String>) -> Self {
        self.class = Some(class.into());
        self
    }
}

/// Binary detection counts plus per-class counts for diagnosis, keyed by
/// (truth class, predicted class).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positive: u64,
    pub false_negative: u64,
    pub false_positive: u64,
    pub true_negative: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_class: BTreeMap<String, u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self {
            true_positive: tp,
            false_negative: fn_,
            false_positive: fp,
            true_negative: tn,
            per_class: BTreeMap::new(),
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positive + self.false_negative + self.false_positive + self.true_negative
    }
}

/// Exact counting of predictions against ground truth. Inputs must be equal
/// length with aligned sample ids. When both sides carry a class label, the
/// per-class matrix is filled with `truth->predicted` transition counts.
pub fn compute_confusion(
    predictions: &[SampleLabel],
    truth: &[SampleLabel],
) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (index, (p, t)) in predictions.iter().zip(truth).enumerate() {
        if p.sample_id != t.sample_id {
            return Err(MetricsError::MisalignedSamples {
                index,
                prediction: p.sample_id.clone(),
                truth: t.sample_id.clone(),
            });
        }
        match (p.positive, t.positive) {
            (true, true) => cm.true_positive += 1,
            (false, true) => cm.false_negative += 1,
            (true, false) => cm.false_positive += 1,
            (false, false) => cm.true_negative += 1,
        }
        if let (Some(pc), Some(tc)) = (&p.class, &t.class) {
            *cm.per_class.entry(format!("{tc}->{pc}")).or_insert(0) += 1;
        }
    }
    Ok(cm)
}

/// A rate that may be undefined (zero denominator). Undefined renders as
/// `n/a`, never silently as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue(pub Option<f64>);

impl MetricValue {
    pub fn ratio(numerator: u64, denominator: u64) -> Self {
        if denominator == 0 {
            MetricValue(None)
        } else {
            MetricValue(Some(numerator as f64 / denominator as f64))
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.0
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.4}"),
            None => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: MetricValue,
    pub recall: MetricValue,
    pub fnr: MetricValue,
    pub fpr: MetricValue,
}

impl Metrics {
    /// Machine-readable row: `accuracy,recall,fnr,fpr`.
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.accuracy, self.recall, self.fnr, self.fpr)
    }
}

/// accuracy = (tp+tn)/total; recall = tp/(tp+fn); fnr = fn/(tp+fn);
/// fpr = fp/(fp+tn). Undefined denominators yield `n/a`.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let positives = cm.true_positive + cm.false_negative;
    let negatives = cm.false_positive + cm.true_negative;
    Ok(Metrics {
        accuracy: MetricValue::ratio(cm.true_positive + cm.true_negative, cm.total()),
        recall: MetricValue::ratio(cm.true_positive, positives),
        fnr: MetricValue::ratio(cm.false_negative, positives),
        fpr: MetricValue::ratio(cm.false_positive, negatives),
    })
}
