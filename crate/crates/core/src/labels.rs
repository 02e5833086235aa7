//! Per-class teacher vectors: plain one-hot labels and outlying labels.
//!
//! An outlying label is a scaled one-hot vector whose hot value grows with
//! class rarity: classes sorted by sample count descending receive the
//! multipliers 1, 2, …, K in that order, each scaled by α. The rarest class
//! therefore gets the target farthest from the origin, which is the whole
//! point — a squared-error loss then pulls rare-class logits outward harder
//! than frequent-class logits.

use std::cmp::Reverse;

use crate::error::{Error, Result};

/// Which construction produced a [`TargetTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    OneHot,
    Outlying,
}

/// K teacher vectors of width K, one per true class; row k is the regression
/// target for class k. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTable {
    num_classes: usize,
    alpha: f64,
    kind: TargetKind,
    rows: Vec<f64>,
}

impl TargetTable {
    /// Identity-like table: row k holds 1 at index k.
    pub fn one_hot(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "target tables need at least 2 classes, got {num_classes}"
            )));
        }
        let mut rows = vec![0.0; num_classes * num_classes];
        for k in 0..num_classes {
            rows[k * num_classes + k] = 1.0;
        }
        Ok(Self {
            num_classes,
            alpha: 1.0,
            kind: TargetKind::OneHot,
            rows,
        })
    }

    /// Outlying table for the given per-class sample counts: row k holds
    /// `multiplier(k) · alpha` at index k, where the most frequent class has
    /// multiplier 1 and the rarest has multiplier K. Ties in counts are broken
    /// by ascending class index, so construction is deterministic.
    pub fn outlying(class_counts: &[usize], alpha: f64) -> Result<Self> {
        let num_classes = class_counts.len();
        if num_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "target tables need at least 2 classes, got {num_classes}"
            )));
        }
        if let Some(empty) = class_counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidArgument(format!(
                "class {empty} has no samples; outlying labels need every count >= 1"
            )));
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "alpha must be a finite value > 0, got {alpha}"
            )));
        }
        // Descending count, ascending index among ties; position in this
        // order is multiplier − 1.
        let mut order: Vec<usize> = (0..num_classes).collect();
        order.sort_unstable_by_key(|&class| (Reverse(class_counts[class]), class));
        let mut rows = vec![0.0; num_classes * num_classes];
        for (position, &class) in order.iter().enumerate() {
            rows[class * num_classes + class] = (position + 1) as f64 * alpha;
        }
        Ok(Self {
            num_classes,
            alpha,
            kind: TargetKind::Outlying,
            rows,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    /// Teacher vector for `class`.
    pub fn row(&self, class: usize) -> Result<&[f64]> {
        if class >= self.num_classes {
            return Err(Error::ClassOutOfRange {
                index: class,
                num_classes: self.num_classes,
            });
        }
        let k = self.num_classes;
        Ok(&self.rows[class * k..(class + 1) * k])
    }

    /// The single nonzero entry of row `class`.
    pub fn hot_value(&self, class: usize) -> Result<f64> {
        self.row(class).map(|row| row[class])
    }
}
