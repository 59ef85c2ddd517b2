//! Confusion matrices, agreement metrics and the control analyses.

mod bpm;
mod permutation;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bpm::{bpm_confusion_analysis, BpmAnalysis};
pub use permutation::{
    label_permutation_accuracies, permutation_test_labels, permutation_test_weights, permuted_accuracy,
    shuffle_weights, PermutationResult,
};

/// Counts of (true, predicted) label pairs; rows are true labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u64>>", into = "Vec<Vec<u64>>")]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl TryFrom<Vec<Vec<u64>>> for ConfusionMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u64>>) -> Result<Self> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::Malformed {
                what: "confusion matrix",
                detail: "rows must have one count per class".into(),
            });
        }
        Ok(Self {
            classes,
            counts: rows.concat(),
        })
    }
}

impl From<ConfusionMatrix> for Vec<Vec<u64>> {
    fn from(cm: ConfusionMatrix) -> Self {
        cm.counts.chunks(cm.classes.max(1)).map(<[u64]>::to_vec).collect()
    }
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_predictions(labels: &[usize], predictions: &[usize], classes: usize) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::shape("confusion matrix", labels.len(), predictions.len()));
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in labels.iter().zip(predictions) {
            if t >= classes || p >= classes {
                return Err(Error::InvalidArgument(format!(
                    "label pair ({t}, {p}) outside {classes} classes"
                )));
            }
            cm.counts[t * classes + p] += 1;
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn set(&mut self, truth: usize, predicted: usize, count: u64) {
        self.counts[truth * self.classes + predicted] = count;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|j| self.get(c, j)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, c)).sum()
    }

    /// Every count multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        Self {
            classes: self.classes,
            counts: self.counts.iter().map(|c| c * k).collect(),
        }
    }

    /// Rows and columns reindexed so that new class `i` is old class `order[i]`.
    pub fn reindexed(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.classes, "reindex order length");
        let mut out = Self::new(self.classes);
        for (i, &oi) in order.iter().enumerate() {
            for (j, &oj) in order.iter().enumerate() {
                out.set(i, j, self.get(oi, oj));
            }
        }
        out
    }

    /// Comma-separated counts with a header row of predicted labels.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("true\\predicted");
        for n in names {
            write!(out, ",{n}").expect("write to string");
        }
        out.push('\n');
        for (i, n) in names.iter().enumerate() {
            out.push_str(n);
            for j in 0..self.classes {
                write!(out, ",{}", self.get(i, j)).expect("write to string");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub kappa: f64,
    /// Expected agreement was 1, so kappa is reported as 0.
    pub kappa_degenerate: bool,
}

/// Accuracy, macro-averaged precision, recall and F1, and Cohen's kappa.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyConfusion);
    }
    let k = cm.classes();
    let n = total as f64;
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let (mut precision, mut recall, mut f1) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let p = ratio(cm.get(c, c), cm.col_sum(c));
        let r = ratio(cm.get(c, c), cm.row_sum(c));
        precision += p;
        recall += r;
        f1 += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let accuracy = cm.trace() as f64 / n;
    let agree: u128 = (0..k).map(|c| cm.row_sum(c) as u128 * cm.col_sum(c) as u128).sum();
    let degenerate = agree == total as u128 * total as u128;
    let kappa = if degenerate {
        0.0
    } else {
        let pe = agree as f64 / (n * n);
        (accuracy - pe) / (1.0 - pe)
    };
    Ok(MetricsReport {
        accuracy,
        precision_macro: precision / k as f64,
        recall_macro: recall / k as f64,
        f1_macro: f1 / k as f64,
        kappa,
        kappa_degenerate: degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnjoymentBin {
    Low,
    Medium,
    High,
}

impl EnjoymentBin {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EnjoymentBin::Low => "low",
            EnjoymentBin::Medium => "medium",
            EnjoymentBin::High => "high",
        }
    }
}

/// Equal-width tertiles of the 1 to 9 scale: 1-3, 4-6, 7-9.
pub fn bin_enjoyment(rating: i64) -> Result<EnjoymentBin> {
    match rating {
        1..=3 => Ok(EnjoymentBin::Low),
        4..=6 => Ok(EnjoymentBin::Medium),
        7..=9 => Ok(EnjoymentBin::High),
        _ => Err(Error::RatingOutOfRange(rating)),
    }
}

/// Everything written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub examples: usize,
    pub classes: usize,
    pub metrics: MetricsReport,
    pub confusion_matrix: ConfusionMatrix,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bpm: Option<BpmAnalysis>,
}
