//! The experiment configuration: a flat TOML file with a fixed schema,
//! defaults for every key, strict rejection of unknown keys, and flag
//! overrides for each value.
//!
//! The same struct round-trips back to TOML as the "effective config" echoed
//! into the output directory, with the resolved class means filled in so the
//! echo is complete provenance on its own.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use longtail::labels::TargetKind;
use longtail::losses::LossKind;
use longtail::train::{ScheduleKind, SelectionMetric, TrainConfig};
use longtail::{GaussianMixtureSpec, ImbalanceKind, ImbalanceSpec};

use crate::commands::CliError;

/// Loss selector as it appears in config files and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LossChoice {
    Ce,
    Wce,
    Focal,
    Mse,
    MseOl,
}

impl From<LossChoice> for LossKind {
    fn from(choice: LossChoice) -> Self {
        match choice {
            LossChoice::Ce => LossKind::Ce,
            LossChoice::Wce => LossKind::Wce,
            LossChoice::Focal => LossKind::Focal,
            LossChoice::Mse => LossKind::Mse,
            LossChoice::MseOl => LossKind::MseOl,
        }
    }
}

impl fmt::Display for LossChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossChoice::Ce => "ce",
            LossChoice::Wce => "wce",
            LossChoice::Focal => "focal",
            LossChoice::Mse => "mse",
            LossChoice::MseOl => "mse-ol",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ImbalanceChoice {
    LongTailed,
    Step,
}

impl From<ImbalanceChoice> for ImbalanceKind {
    fn from(choice: ImbalanceChoice) -> Self {
        match choice {
            ImbalanceChoice::LongTailed => ImbalanceKind::LongTailed,
            ImbalanceChoice::Step => ImbalanceKind::Step,
        }
    }
}

impl fmt::Display for ImbalanceChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImbalanceChoice::LongTailed => "long-tailed",
            ImbalanceChoice::Step => "step",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleChoice {
    Poly,
    Constant,
}

impl From<ScheduleChoice> for ScheduleKind {
    fn from(choice: ScheduleChoice) -> Self {
        match choice {
            ScheduleChoice::Poly => ScheduleKind::Poly,
            ScheduleChoice::Constant => ScheduleKind::Constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MetricChoice {
    MacroF,
    Miou,
}

impl From<MetricChoice> for SelectionMetric {
    fn from(choice: MetricChoice) -> Self {
        match choice {
            MetricChoice::MacroF => SelectionMetric::MacroF,
            MetricChoice::Miou => SelectionMetric::MeanIou,
        }
    }
}

impl fmt::Display for MetricChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricChoice::MacroF => "macro-f",
            MetricChoice::Miou => "miou",
        })
    }
}

/// Which dataset split a command operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Val,
    Test,
}

impl SplitChoice {
    pub fn name(self) -> &'static str {
        match self {
            SplitChoice::Train => "train",
            SplitChoice::Val => "val",
            SplitChoice::Test => "test",
        }
    }
}

/// Everything an experiment needs, in one flat key space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    // Mixture geometry.
    pub classes: usize,
    pub dim: usize,
    /// Per-class means; omitted => evenly spaced on the unit circle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<Vec<f64>>>,
    pub stddev: f64,
    // Imbalance profile of the train split.
    pub imbalance: ImbalanceChoice,
    pub ratio: f64,
    pub n_max: usize,
    // Balanced split sizes.
    pub val_per_class: usize,
    pub test_per_class: usize,
    // Loss selection.
    pub loss: LossChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub gamma: f64,
    // Optimization.
    pub lr_base: f64,
    pub epoch_max: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub schedule: ScheduleChoice,
    pub hidden: Vec<usize>,
    pub selection_metric: MetricChoice,
    // Seeding and sweeps.
    pub seed: u64,
    /// Seed list for sweeps; empty means "just `seed`".
    pub seeds: Vec<u64>,
    /// Candidate α values for sweeps.
    pub alphas: Vec<f64>,
    // Output.
    pub out_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            classes: 3,
            dim: 2,
            means: None,
            stddev: 0.6,
            imbalance: ImbalanceChoice::LongTailed,
            ratio: 50.0,
            n_max: 1000,
            val_per_class: 100,
            test_per_class: 500,
            loss: LossChoice::Ce,
            alpha: None,
            gamma: 2.0,
            lr_base: 0.05,
            epoch_max: 200,
            batch_size: 32,
            momentum: 0.9,
            weight_decay: 0.0,
            schedule: ScheduleChoice::Poly,
            hidden: vec![16, 2],
            selection_metric: MetricChoice::MacroF,
            seed: 0,
            seeds: Vec::new(),
            alphas: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
            out_dir: "out".into(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

impl ExperimentConfig {
    /// Loads a TOML config file. Unknown keys and malformed values are usage
    /// errors that name the offending key.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    /// The per-class means actually used: the configured ones, or `classes`
    /// points evenly spaced on the unit circle (remaining coordinates 0).
    pub fn resolved_means(&self) -> Result<Vec<Vec<f64>>, CliError> {
        if let Some(means) = &self.means {
            return Ok(means.clone());
        }
        if self.dim < 2 {
            return Err(usage(
                "default class means need dim >= 2; set means explicitly for dim 1",
            ));
        }
        Ok((0..self.classes)
            .map(|k| {
                let angle = TAU * k as f64 / self.classes as f64;
                let mut mean = vec![0.0; self.dim];
                mean[0] = angle.cos();
                mean[1] = angle.sin();
                mean
            })
            .collect())
    }

    /// The train-split class counts this config asks the generator for.
    pub fn planned_counts(&self) -> Result<Vec<usize>, CliError> {
        let spec = self.imbalance_spec();
        let counts = match self.imbalance {
            ImbalanceChoice::LongTailed => longtail::long_tailed_counts(self.classes, &spec),
            ImbalanceChoice::Step => longtail::step_counts(self.classes, &spec),
        };
        counts.map_err(|e| usage(e.to_string()))
    }

    /// Validates the whole config up front; every violation is a usage error.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.classes < 2 {
            return Err(usage("classes must be >= 2"));
        }
        if self.dim == 0 {
            return Err(usage("dim must be >= 1"));
        }
        if !self.stddev.is_finite() || self.stddev <= 0.0 {
            return Err(usage(format!("stddev must be positive, got {}", self.stddev)));
        }
        if !self.ratio.is_finite() || self.ratio < 1.0 {
            return Err(usage(format!("ratio must be >= 1, got {}", self.ratio)));
        }
        if self.n_max == 0 {
            return Err(usage("n-max must be >= 1"));
        }
        if let Some(means) = &self.means {
            if means.len() != self.classes {
                return Err(usage(format!(
                    "means lists {} classes, config says {}",
                    means.len(),
                    self.classes
                )));
            }
            for (k, mean) in means.iter().enumerate() {
                if mean.len() != self.dim {
                    return Err(usage(format!(
                        "means[{k}] has {} coordinates, dim is {}",
                        mean.len(),
                        self.dim
                    )));
                }
                if mean.iter().any(|v| !v.is_finite()) {
                    return Err(usage(format!("means[{k}] has a non-finite coordinate")));
                }
            }
        }
        if self.loss == LossChoice::MseOl {
            match self.alpha {
                Some(a) if a.is_finite() && a > 0.0 => {}
                Some(a) => {
                    return Err(usage(format!("loss mse-ol requires alpha > 0, got {a}")));
                }
                None => return Err(usage("loss mse-ol requires alpha; pass --alpha or set it in the config")),
            }
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() || a <= 0.0 {
                return Err(usage(format!("alpha must be > 0, got {a}")));
            }
        }
        if self.alphas.is_empty() {
            return Err(usage("alphas must list at least one candidate"));
        }
        if self.alphas.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(usage("every alphas candidate must be > 0"));
        }
        // Mirror the core-side training checks so they fail fast as config
        // errors rather than mid-run.
        self.train_config().validate().map_err(|e| usage(e.to_string()))?;
        let planned: usize = self.planned_counts()?.iter().sum();
        if self.batch_size > planned {
            return Err(usage(format!(
                "batch-size {} exceeds the {planned}-sample train split this config generates",
                self.batch_size
            )));
        }
        Ok(())
    }

    pub fn imbalance_spec(&self) -> ImbalanceSpec {
        ImbalanceSpec {
            kind: self.imbalance.into(),
            ratio: self.ratio,
            n_max: self.n_max,
        }
    }

    pub fn mixture_spec(&self, seed: u64) -> Result<GaussianMixtureSpec, CliError> {
        Ok(GaussianMixtureSpec {
            num_classes: self.classes,
            dim: self.dim,
            means: self.resolved_means()?,
            stddev: self.stddev,
            seed,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.loss.into(),
            alpha: self.alpha,
            gamma: self.gamma,
            lr_base: self.lr_base,
            epoch_max: self.epoch_max,
            batch_size: self.batch_size,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            seed: self.seed,
            schedule: self.schedule.into(),
            hidden: self.hidden.clone(),
            selection_metric: self.selection_metric.into(),
        }
    }

    /// The target-table kind the configured loss trains against.
    pub fn target_kind(&self) -> TargetKind {
        match self.loss {
            LossChoice::MseOl => TargetKind::Outlying,
            _ => TargetKind::OneHot,
        }
    }

    /// Seeds a sweep iterates over: the explicit list, or just `seed`.
    pub fn sweep_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    /// Serializes the effective config, with the means filled in, for the
    /// provenance echo in the output directory.
    pub fn effective_toml(&self) -> Result<String, CliError> {
        let mut effective = self.clone();
        effective.means = Some(self.resolved_means()?);
        toml::to_string(&effective)
            .map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
    }
}
