//! Deterministic mini-batch training: SGD with momentum and weight decay,
//! polynomial learning-rate decay, loss dispatch, and validation-based α
//! selection.
//!
//! Determinism contract: the model is initialized from `seed` (ChaCha8,
//! stream 0) and the per-epoch shuffle draws from the same seed on ChaCha8
//! stream 1, applied to a fresh canonical index order `0..n` every epoch.
//! Identical data, config, and seed therefore reproduce training bit for bit
//! on any platform.
//!
//! The optimizer update is the common SGD form
//! `v ← momentum·v + (g + weight_decay·θ); θ ← θ − lr·v`, applied to weights
//! and biases alike, where `g` is the mean loss gradient over the mini-batch
//! (the single 1/batch scaling happens here, not in the loss).

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::labels::{TargetKind, TargetTable};
use crate::losses::{batch_loss, median_frequency_weights, Loss, LossKind};
use crate::metrics::evaluate;
use crate::network::{MlpModel, ModelGrad};

/// Learning-rate schedule selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Polynomial decay, exponent 0.9, epoch granularity.
    Poly,
    /// Constant `lr_base`.
    Constant,
}

/// Metric maximized when selecting α on validation data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMetric {
    MacroF,
    MeanIou,
}

/// Everything a training run needs besides the data and the target table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    /// α for `mse-ol`; ignored by the other losses.
    pub alpha: Option<f64>,
    /// Focusing exponent for `focal`.
    pub gamma: f64,
    pub lr_base: f64,
    pub epoch_max: usize,
    pub batch_size: usize,
    /// In [0, 1).
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub schedule: ScheduleKind,
    /// Hidden-layer widths; the full architecture is `[D, hidden…, K]`.
    pub hidden: Vec<usize>,
    pub selection_metric: SelectionMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Ce,
            alpha: None,
            gamma: 2.0,
            lr_base: 0.05,
            epoch_max: 200,
            batch_size: 32,
            momentum: 0.9,
            weight_decay: 0.0,
            seed: 0,
            schedule: ScheduleKind::Poly,
            hidden: vec![16, 2],
            selection_metric: SelectionMetric::MacroF,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // lr_base 0 is allowed: it degenerates to a no-op run, which is a
        // documented sanity case. Only negatives and non-finites are rejected.
        if !self.lr_base.is_finite() || self.lr_base < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lr_base must be a finite value >= 0, got {}",
                self.lr_base
            )));
        }
        if self.epoch_max == 0 {
            return Err(Error::InvalidArgument("epoch_max must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weight_decay must be a finite value >= 0, got {}",
                self.weight_decay
            )));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gamma must be a finite value >= 0, got {}",
                self.gamma
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "hidden layer widths must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Full layer-size chain for a dataset with `dim` inputs and `k` classes.
    pub fn layer_sizes(&self, dim: usize, k: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(k);
        sizes
    }
}

/// Polynomial decay: `lr_base · (1 − epoch/epoch_max)^0.9`. Exact at the
/// endpoints: epoch 0 gives `lr_base`, epoch_max gives 0.
pub fn poly_lr(lr_base: f64, epoch: usize, epoch_max: usize) -> Result<f64> {
    if !lr_base.is_finite() || lr_base < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lr_base must be a finite value >= 0, got {lr_base}"
        )));
    }
    if epoch_max == 0 {
        return Err(Error::InvalidArgument("epoch_max must be >= 1".into()));
    }
    if epoch > epoch_max {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} out of range 0..={epoch_max}"
        )));
    }
    let remaining = 1.0 - epoch as f64 / epoch_max as f64;
    Ok(lr_base * remaining.powf(0.9))
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sample loss observed over the epoch's batches.
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_macro_f: f64,
}

/// Header of the per-epoch CSV log; field order is part of the format.
pub const EPOCH_CSV_HEADER: &str = "epoch,lr,train_loss,val_accuracy,val_macro_f";

impl EpochRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.epoch, self.lr, self.train_loss, self.val_accuracy, self.val_macro_f
        )
    }
}

/// Renders the documented line-delimited epoch log: header then one record
/// per line.
pub fn epochs_to_csv(records: &[EpochRecord]) -> String {
    let mut text = String::with_capacity(32 * (records.len() + 1));
    text.push_str(EPOCH_CSV_HEADER);
    text.push('\n');
    for record in records {
        let _ = writeln!(text, "{}", record.to_csv_row());
    }
    text
}

/// A finished training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub model: MlpModel,
    pub epochs: Vec<EpochRecord>,
    pub wall_seconds: f64,
}

fn resolve_loss(config: &TrainConfig, table: &TargetTable, counts: &[usize]) -> Result<Loss> {
    match config.loss {
        LossKind::Ce => Ok(Loss::CrossEntropy { weights: None }),
        LossKind::Wce => Ok(Loss::CrossEntropy {
            weights: Some(median_frequency_weights(counts)?),
        }),
        LossKind::Focal => Ok(Loss::Focal {
            gamma: config.gamma,
            weights: None,
        }),
        LossKind::Mse => Ok(Loss::SquaredError {
            table: table.clone(),
        }),
        LossKind::MseOl => {
            if table.kind() != TargetKind::Outlying {
                return Err(Error::InvalidArgument(
                    "loss mse-ol needs an outlying target table".into(),
                ));
            }
            Ok(Loss::SquaredError {
                table: table.clone(),
            })
        }
    }
}

/// Trains a fresh model on `train`, recording validation metrics per epoch.
///
/// The target table drives the squared-error losses (`mse`, `mse-ol`); the
/// cross-entropy family only needs the class index and ignores it. An empty
/// validation set records 0 for both validation metrics.
pub fn train_model(
    train: &LabeledDataset,
    val: &LabeledDataset,
    table: &TargetTable,
    config: &TrainConfig,
) -> Result<TrainResult> {
    config.validate()?;
    let n = train.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty training dataset".into()));
    }
    if config.batch_size > n {
        return Err(Error::InvalidArgument(format!(
            "batch_size {} exceeds training set size {n}",
            config.batch_size
        )));
    }
    let k = train.num_classes();
    if table.num_classes() != k {
        return Err(Error::ShapeMismatch(format!(
            "target table has {} classes, dataset has {k}",
            table.num_classes()
        )));
    }
    if !val.is_empty() {
        if val.dim() != train.dim() {
            return Err(Error::ShapeMismatch(format!(
                "validation width {} does not match training width {}",
                val.dim(),
                train.dim()
            )));
        }
        if val.num_classes() > k {
            return Err(Error::ShapeMismatch(format!(
                "validation set has {} classes, training set has {k}",
                val.num_classes()
            )));
        }
    }

    let counts = train.class_counts();
    let loss = resolve_loss(config, table, &counts)?;
    let mut model = MlpModel::init(&config.layer_sizes(train.dim(), k), config.seed)?;
    let mut velocity = ModelGrad::zeros_like(&model);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let started = Instant::now();
    let mut records = Vec::with_capacity(config.epoch_max);
    for epoch in 0..config.epoch_max {
        let lr = match config.schedule {
            ScheduleKind::Poly => poly_lr(config.lr_base, epoch, config.epoch_max)?,
            ScheduleKind::Constant => config.lr_base,
        };

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
            // Exploding parameters surface as non-finite logits or losses;
            // either way the run aborts with the position of the bad batch.
            let diverged = |e: Error| match e {
                Error::NonFinite(_) => Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                    lr,
                },
                other => other,
            };
            let mut traces = Vec::with_capacity(chunk.len());
            let mut logits = Vec::with_capacity(chunk.len());
            let mut classes = Vec::with_capacity(chunk.len());
            for &row in chunk {
                let trace = model.forward(train.feature(row)).map_err(diverged)?;
                logits.push(trace.logits().to_vec());
                classes.push(train.label(row));
                traces.push(trace);
            }
            let batch = batch_loss(&loss, &logits, &classes).map_err(diverged)?;
            if !batch.mean_value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                    lr,
                });
            }
            loss_sum += batch.mean_value * chunk.len() as f64;

            let mut grad = ModelGrad::zeros_like(&model);
            for (trace, sample) in traces.iter().zip(batch.per_sample.iter()) {
                grad.add_assign(&model.backward(trace, &sample.grad)?);
            }
            // The only 1/batch scaling: per-sample gradients are summed above.
            grad.scale(1.0 / chunk.len() as f64);

            for (layer, (vel, g)) in model
                .layers_mut()
                .iter_mut()
                .zip(velocity.layers.iter_mut().zip(grad.layers.iter()))
            {
                for ((w, v), gw) in layer
                    .weights
                    .iter_mut()
                    .zip(vel.weights.iter_mut())
                    .zip(g.weights.iter())
                {
                    *v = config.momentum * *v + (gw + config.weight_decay * *w);
                    *w -= lr * *v;
                }
                for ((b, v), gb) in layer
                    .biases
                    .iter_mut()
                    .zip(vel.biases.iter_mut())
                    .zip(g.biases.iter())
                {
                    *v = config.momentum * *v + (gb + config.weight_decay * *b);
                    *b -= lr * *v;
                }
            }
        }

        let (val_accuracy, val_macro_f) = if val.is_empty() {
            (0.0, 0.0)
        } else {
            let r = evaluate(&model, val)?;
            (r.accuracy, r.macro_f)
        };
        records.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / n as f64,
            val_accuracy,
            val_macro_f,
        });
    }

    Ok(TrainResult {
        model,
        epochs: records,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// One row of the α-selection table.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMetric {
    pub alpha: f64,
    pub metric: f64,
}

/// Outcome of [`select_alpha`]: the winning α, its trained run, and the full
/// per-candidate table in candidate order.
#[derive(Debug)]
pub struct AlphaSelection {
    pub best_alpha: f64,
    pub best: TrainResult,
    pub table: Vec<AlphaMetric>,
}

/// Trains one `mse-ol` model per candidate α (fresh model, identical seed)
/// and returns the candidate maximizing the configured validation metric.
/// Ties go to the smaller α. Training failures are annotated with the α in
/// progress.
pub fn select_alpha(
    train: &LabeledDataset,
    val: &LabeledDataset,
    candidates: &[f64],
    config: &TrainConfig,
) -> Result<AlphaSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate list".into()));
    }
    if val.is_empty() {
        return Err(Error::InvalidArgument(
            "alpha selection needs a non-empty validation set".into(),
        ));
    }
    let counts = train.class_counts();
    let mut best: Option<(f64, TrainResult)> = None;
    let mut table_rows = Vec::with_capacity(candidates.len());
    for &alpha in candidates {
        let annotate = |e: Error| Error::AlphaCandidate {
            alpha,
            source: Box::new(e),
        };
        let targets = TargetTable::outlying(&counts, alpha).map_err(annotate)?;
        let mut candidate_config = config.clone();
        candidate_config.loss = LossKind::MseOl;
        candidate_config.alpha = Some(alpha);
        let result = train_model(train, val, &targets, &candidate_config).map_err(annotate)?;
        let eval = evaluate(&result.model, val).map_err(annotate)?;
        let metric = match config.selection_metric {
            SelectionMetric::MacroF => eval.macro_f,
            SelectionMetric::MeanIou => eval.mean_iou,
        };
        table_rows.push(AlphaMetric { alpha, metric });
        let replace = match &best {
            None => true,
            Some((best_alpha, _)) => {
                let best_metric = table_rows
                    .iter()
                    .find(|row| row.alpha == *best_alpha)
                    .map(|row| row.metric)
                    .unwrap_or(f64::NEG_INFINITY);
                metric > best_metric || (metric == best_metric && alpha < *best_alpha)
            }
        };
        if replace {
            best = Some((alpha, result));
        }
    }
    let (best_alpha, best) = best.expect("candidates is non-empty");
    Ok(AlphaSelection {
        best_alpha,
        best,
        table: table_rows,
    })
}
