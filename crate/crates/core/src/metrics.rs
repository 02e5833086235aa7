//! Confusion-matrix evaluation: top-1 accuracy, per-class precision, recall,
//! F1 and IoU, macro F-measure, and mean IoU.
//!
//! The F-measure is macro-averaged — the unweighted mean of per-class F1 —
//! so it reflects per-class behavior rather than sample mass. All 0/0
//! degeneracies (a class never predicted and never true) are defined as 0,
//! keeping reports finite for empty classes.

use std::fmt::Write as _;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::network::MlpModel;

/// K×K counts; rows are true classes, columns are predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    /// Counts each (true, predicted) pair.
    pub fn from_labels(true_labels: &[usize], pred_labels: &[usize], num_classes: usize) -> Result<Self> {
        if true_labels.len() != pred_labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} true labels vs {} predictions",
                true_labels.len(),
                pred_labels.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(num_classes);
        for (&t, &p) in true_labels.iter().zip(pred_labels.iter()) {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    /// Records one evaluated sample.
    pub fn add(&mut self, true_class: usize, pred_class: usize) -> Result<()> {
        for class in [true_class, pred_class] {
            if class >= self.num_classes {
                return Err(Error::ClassOutOfRange {
                    index: class,
                    num_classes: self.num_classes,
                });
            }
        }
        self.counts[true_class * self.num_classes + pred_class] += 1;
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Count of samples with true class `t` predicted as `p`.
    pub fn count(&self, t: usize, p: usize) -> usize {
        self.counts[t * self.num_classes + p]
    }

    /// Total evaluated samples.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Raw counts as CSV, one row of the matrix per line (rows = true class,
    /// columns = predicted class).
    pub fn to_csv(&self) -> String {
        let mut text = String::new();
        for t in 0..self.num_classes {
            for p in 0..self.num_classes {
                if p > 0 {
                    text.push(',');
                }
                let _ = write!(text, "{}", self.count(t, p));
            }
            text.push('\n');
        }
        text
    }
}

/// Per-class derived measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
}

/// Full evaluation summary derived from one confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_f: f64,
    pub mean_iou: f64,
}

impl EvalReport {
    /// Serializes with fixed field names, one `key=value` group per line.
    pub fn to_text(&self) -> String {
        let mut text = String::new();
        let _ = writeln!(text, "accuracy={}", self.accuracy);
        let _ = writeln!(text, "macro_f={}", self.macro_f);
        let _ = writeln!(text, "mean_iou={}", self.mean_iou);
        for (class, m) in self.per_class.iter().enumerate() {
            let _ = writeln!(
                text,
                "class={class} precision={} recall={} f1={} iou={}",
                m.precision, m.recall, m.f1, m.iou
            );
        }
        text
    }
}

fn ratio_or_zero(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Derives accuracy, per-class precision/recall/F1/IoU, macro-F, and mean IoU
/// from a confusion matrix. Errors on an all-zero matrix.
pub fn report(cm: &ConfusionMatrix) -> Result<EvalReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument(
            "confusion matrix holds no samples".into(),
        ));
    }
    let k = cm.num_classes();
    let mut trace = 0;
    let mut per_class = Vec::with_capacity(k);
    for c in 0..k {
        let tp = cm.count(c, c);
        trace += tp;
        let mut fp = 0;
        let mut fn_ = 0;
        for other in 0..k {
            if other != c {
                fp += cm.count(other, c);
                fn_ += cm.count(c, other);
            }
        }
        let precision = ratio_or_zero(tp, tp + fp);
        let recall = ratio_or_zero(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let iou = ratio_or_zero(tp, tp + fp + fn_);
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            iou,
        });
    }
    let accuracy = trace as f64 / total as f64;
    let macro_f = per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64;
    let mean_iou = per_class.iter().map(|m| m.iou).sum::<f64>() / k as f64;
    Ok(EvalReport {
        accuracy,
        per_class,
        macro_f,
        mean_iou,
    })
}

/// Runs the model over a dataset and reports confusion-matrix metrics.
pub fn evaluate(model: &MlpModel, dataset: &LabeledDataset) -> Result<EvalReport> {
    report(&confusion_of(model, dataset)?)
}

/// The confusion matrix of a model over a dataset.
pub fn confusion_of(model: &MlpModel, dataset: &LabeledDataset) -> Result<ConfusionMatrix> {
    if dataset.dim() != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "dataset width {} does not match model input {}",
            dataset.dim(),
            model.input_dim()
        )));
    }
    let k = dataset.num_classes().max(model.output_dim());
    let mut cm = ConfusionMatrix::new(k);
    for i in 0..dataset.len() {
        let pred = model.predict(dataset.feature(i))?;
        cm.add(dataset.label(i), pred)?;
    }
    Ok(cm)
}
