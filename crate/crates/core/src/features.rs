//! Penultimate-activation export for feature-space inspection.
//!
//! With the default penultimate width of 2, the dumped coordinates can be
//! scatter-plotted directly — no embedding step. Two summaries quantify how
//! far each class sits from the origin: [`class_centroid_spread`] on the
//! dumped penultimate coordinates, and [`class_logit_norms`] on the logits,
//! where outlying targets place their magnitude contract (rare classes are
//! trained toward targets of larger norm, so their logits should end up
//! farther out).

use std::fmt::Write as _;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::network::{argmax_lowest, MlpModel};

/// One exported sample: penultimate coordinates plus true and predicted class.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub coords: Vec<f64>,
    pub true_class: usize,
    pub pred_class: usize,
}

/// All rows of one split, tagged with the split name.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDump {
    pub dim: usize,
    pub num_classes: usize,
    pub split: String,
    pub rows: Vec<FeatureRow>,
}

impl FeatureDump {
    /// CSV with header `f0..f{p-1},true,pred,split`, one row per sample.
    pub fn to_csv(&self) -> String {
        let mut text = String::new();
        for d in 0..self.dim {
            let _ = write!(text, "f{d},");
        }
        text.push_str("true,pred,split\n");
        for row in &self.rows {
            for x in &row.coords {
                let _ = write!(text, "{x},");
            }
            let _ = writeln!(text, "{},{},{}", row.true_class, row.pred_class, self.split);
        }
        text
    }
}

/// Forward-passes every sample and records its penultimate activation with
/// true and predicted class. Pure: no training side effects.
pub fn dump_features(model: &MlpModel, dataset: &LabeledDataset, split: &str) -> Result<FeatureDump> {
    if dataset.dim() != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "dataset width {} does not match model input {}",
            dataset.dim(),
            model.input_dim()
        )));
    }
    let mut rows = Vec::with_capacity(dataset.len());
    for i in 0..dataset.len() {
        let trace = model.forward(dataset.feature(i))?;
        rows.push(FeatureRow {
            coords: trace.penultimate().to_vec(),
            true_class: dataset.label(i),
            pred_class: argmax_lowest(trace.logits()),
        });
    }
    Ok(FeatureDump {
        dim: model.penultimate_dim(),
        num_classes: dataset.num_classes(),
        split: split.to_string(),
        rows,
    })
}

/// Mean position and mean distance-from-origin of one class's features.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpread {
    pub centroid: Vec<f64>,
    pub mean_radius: f64,
    pub count: usize,
}

/// Per-class centroid and mean Euclidean norm of the dumped coordinates.
/// Classes with no samples in the dump report `None` rather than zero.
pub fn class_centroid_spread(dump: &FeatureDump) -> Result<Vec<Option<ClassSpread>>> {
    if dump.rows.is_empty() {
        return Err(Error::InvalidArgument("empty feature dump".into()));
    }
    let mut sums = vec![vec![0.0; dump.dim]; dump.num_classes];
    let mut radius_sums = vec![0.0; dump.num_classes];
    let mut counts = vec![0usize; dump.num_classes];
    for row in &dump.rows {
        if row.true_class >= dump.num_classes {
            return Err(Error::ClassOutOfRange {
                index: row.true_class,
                num_classes: dump.num_classes,
            });
        }
        for (s, x) in sums[row.true_class].iter_mut().zip(row.coords.iter()) {
            *s += x;
        }
        radius_sums[row.true_class] += norm(&row.coords);
        counts[row.true_class] += 1;
    }
    Ok((0..dump.num_classes)
        .map(|class| {
            let n = counts[class];
            if n == 0 {
                None
            } else {
                Some(ClassSpread {
                    centroid: sums[class].iter().map(|s| s / n as f64).collect(),
                    mean_radius: radius_sums[class] / n as f64,
                    count: n,
                })
            }
        })
        .collect())
}

/// Mean Euclidean norm of the logits per true class, `None` for classes with
/// no samples. This is where outlying targets leave their magnitude
/// footprint.
pub fn class_logit_norms(model: &MlpModel, dataset: &LabeledDataset) -> Result<Vec<Option<f64>>> {
    if dataset.dim() != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "dataset width {} does not match model input {}",
            dataset.dim(),
            model.input_dim()
        )));
    }
    let mut sums = vec![0.0; dataset.num_classes()];
    let mut counts = vec![0usize; dataset.num_classes()];
    for i in 0..dataset.len() {
        let trace = model.forward(dataset.feature(i))?;
        let label = dataset.label(i);
        sums[label] += norm(trace.logits());
        counts[label] += 1;
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(sum, n)| if n == 0 { None } else { Some(sum / n as f64) })
        .collect())
}

fn norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}
