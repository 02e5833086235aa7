//! Training classifiers on class-imbalanced data with a mean-squared-error
//! loss over outlying targets.
//!
//! The crate provides the full experimental loop as a library:
//!
//! * [`data`] — imbalanced class-count generators (long-tailed, step),
//!   deterministic subsampling, Gaussian-mixture synthesis, CSV round trips.
//! * [`labels`] — per-class target tables: standard one-hot rows, or
//!   "outlying" rows that push rarer classes farther from the origin.
//! * [`losses`] — cross-entropy (plain and class-weighted), focal loss, and
//!   squared error against a target table, each with analytic gradients with
//!   respect to the logits.
//! * [`network`] — a small ReLU multi-layer perceptron with hand-written
//!   forward/backward passes and a plain-text checkpoint format.
//! * [`train`] — deterministic SGD with momentum, polynomial learning-rate
//!   decay, per-epoch validation logging, and validation-based α selection.
//! * [`metrics`] — confusion matrices and the derived per-class and averaged
//!   scores.
//! * [`features`] — penultimate-activation export for inspecting the learned
//!   representation.
//!
//! Everything is `f64`, seeded through ChaCha8, and reproducible bit for bit
//! for a fixed (data, config, seed) triple.

pub mod data;
pub mod error;
pub mod features;
pub mod labels;
pub mod losses;
pub mod metrics;
pub mod network;
pub mod train;

pub use data::{
    load_csv, long_tailed_counts, sample_gaussian_mixture, save_csv, step_counts, subsample,
    GaussianMixtureSpec, ImbalanceKind, ImbalanceSpec, LabeledDataset,
};
pub use error::{Error, Result};
pub use features::{
    class_centroid_spread, class_logit_norms, dump_features, ClassSpread, FeatureDump, FeatureRow,
};
pub use labels::{TargetKind, TargetTable};
pub use losses::{
    batch_loss, ce_loss, focal_loss, median_frequency_weights, mse_loss, softmax, BatchLoss, Loss,
    LossGrad, LossKind,
};
pub use metrics::{confusion_of, evaluate, report, ClassMetrics, ConfusionMatrix, EvalReport};
pub use network::{argmax_lowest, ForwardTrace, Layer, MlpModel, ModelGrad};
pub use train::{
    epochs_to_csv, poly_lr, select_alpha, train_model, AlphaMetric, AlphaSelection, EpochRecord,
    ScheduleKind, SelectionMetric, TrainConfig, TrainResult, EPOCH_CSV_HEADER,
};
