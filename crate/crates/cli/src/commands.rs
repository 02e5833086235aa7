//! The five commands behind the CLI, exposed as library functions so they
//! can be driven in-process by tests as well as by `main`.
//!
//! Every command is deterministic for a fixed (config, seed): reruns produce
//! byte-identical files, except the `timestamp=` line in manifests, which is
//! explicitly excluded from that guarantee.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use longtail::labels::{TargetKind, TargetTable};
use longtail::train::{select_alpha, train_model, TrainConfig};
use longtail::{
    class_centroid_spread, class_logit_norms, confusion_of, dump_features, evaluate, load_csv,
    sample_gaussian_mixture, save_csv, subsample, LabeledDataset, MlpModel,
};

use crate::config::{ExperimentConfig, SplitChoice};

/// Command-level failures, split by exit code: usage/config problems exit 1,
/// runtime problems exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<longtail::Error> for CliError {
    fn from(e: longtail::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// FNV-1a, 64-bit: tiny, dependency-free, stable across platforms. Used to
/// fingerprint dataset and result files in manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn file_hash_line(dir: &Path, name: &str) -> Result<String, CliError> {
    let bytes = std::fs::read(dir.join(name))
        .map_err(|e| CliError::Runtime(format!("cannot hash {name}: {e}")))?;
    Ok(format!("hash-{name}=fnv1a64:{:016x}", fnv1a64(&bytes)))
}

fn timestamp_line() -> String {
    let seconds = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("timestamp={seconds}")
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), content)
        .map_err(|e| CliError::Runtime(format!("cannot write {name}: {e}")))
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "missing {what}: {}",
            path.display()
        )))
    }
}

fn load_split(dir: &Path, split: SplitChoice) -> Result<LabeledDataset, CliError> {
    let path = dir.join(format!("{}.csv", split.name()));
    require_file(&path, "dataset file")?;
    Ok(load_csv(&path)?)
}

fn echo_config(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    write_file(dir, "config.toml", &cfg.effective_toml()?)
}

fn join<T: fmt::Display>(values: impl IntoIterator<Item = T>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Generates the three dataset splits.
///
/// A balanced pool of `n_max` samples per class is drawn first, then the
/// train split is subsampled down to the imbalance profile; validation and
/// test splits are balanced, fresh draws. Derived seeds keep the four draws
/// independent: pool = seed, subsample = seed+1, val = seed+2, test = seed+3.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;

    let counts = cfg.planned_counts()?;
    let pool_counts = vec![cfg.n_max; cfg.classes];
    let pool = sample_gaussian_mixture(&cfg.mixture_spec(cfg.seed)?, &pool_counts)?;
    let train = subsample(&pool, &counts, cfg.seed.wrapping_add(1))?;
    let val = sample_gaussian_mixture(
        &cfg.mixture_spec(cfg.seed.wrapping_add(2))?,
        &vec![cfg.val_per_class; cfg.classes],
    )?;
    let test = sample_gaussian_mixture(
        &cfg.mixture_spec(cfg.seed.wrapping_add(3))?,
        &vec![cfg.test_per_class; cfg.classes],
    )?;

    save_csv(&train, &dir.join("train.csv"))?;
    save_csv(&val, &dir.join("val.csv"))?;
    save_csv(&test, &dir.join("test.csv"))?;

    let mut manifest = String::new();
    manifest.push_str("dataset-manifest v1\n");
    manifest.push_str(&timestamp_line());
    manifest.push('\n');
    manifest.push_str(&format!("seed={}\n", cfg.seed));
    manifest.push_str(&format!("classes={}\n", cfg.classes));
    manifest.push_str(&format!("dim={}\n", cfg.dim));
    manifest.push_str(&format!("imbalance={}\n", cfg.imbalance));
    manifest.push_str(&format!("ratio={}\n", cfg.ratio));
    manifest.push_str(&format!("n-max={}\n", cfg.n_max));
    manifest.push_str(&format!("train-counts={}\n", join(&counts)));
    manifest.push_str(&format!("val-counts={}\n", join(val.class_counts())));
    manifest.push_str(&format!("test-counts={}\n", join(test.class_counts())));
    for name in ["train.csv", "val.csv", "test.csv"] {
        manifest.push_str(&file_hash_line(&dir, name)?);
        manifest.push('\n');
    }
    write_file(&dir, "manifest.txt", &manifest)?;
    echo_config(cfg, &dir)?;

    println!("generated {} under {}", join(["train.csv", "val.csv", "test.csv"]), dir.display());
    println!("train counts: {}", join(&counts));
    Ok(())
}

/// Trains on the generated splits and writes the epoch log, test report,
/// confusion matrix, checkpoint, and a manifest fingerprinting inputs and
/// outputs.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.out_dir);
    let train = load_split(&dir, SplitChoice::Train)?
        .with_num_classes(cfg.classes)
        .map_err(|e| CliError::Runtime(format!("train.csv does not match config: {e}")))?;
    let val = load_split(&dir, SplitChoice::Val)?
        .with_num_classes(cfg.classes)
        .map_err(|e| CliError::Runtime(format!("val.csv does not match config: {e}")))?;
    let test = load_split(&dir, SplitChoice::Test)?
        .with_num_classes(cfg.classes)
        .map_err(|e| CliError::Runtime(format!("test.csv does not match config: {e}")))?;

    let counts = train.class_counts();
    let table = match cfg.target_kind() {
        TargetKind::Outlying => TargetTable::outlying(
            &counts,
            cfg.alpha.expect("validate() guarantees alpha for mse-ol"),
        )?,
        TargetKind::OneHot => TargetTable::one_hot(cfg.classes)?,
    };
    let train_config: TrainConfig = cfg.train_config();
    let result = train_model(&train, &val, &table, &train_config)?;

    let report = evaluate(&result.model, &test)?;
    let confusion = confusion_of(&result.model, &test)?;

    write_file(&dir, "epochs.csv", &longtail::epochs_to_csv(&result.epochs))?;
    write_file(&dir, "report.txt", &report.to_text())?;
    write_file(&dir, "confusion.csv", &confusion.to_csv())?;
    result.model.save(&dir.join("model.ckpt"))?;

    let mut manifest = String::new();
    manifest.push_str("train-manifest v1\n");
    manifest.push_str(&timestamp_line());
    manifest.push('\n');
    manifest.push_str(&format!("seed={}\n", cfg.seed));
    manifest.push_str(&format!("loss={}\n", cfg.loss));
    if let Some(alpha) = cfg.alpha {
        manifest.push_str(&format!("alpha={alpha}\n"));
    }
    manifest.push_str(&format!("epoch-max={}\n", cfg.epoch_max));
    manifest.push_str(&format!("hidden={}\n", join(&cfg.hidden)));
    manifest.push_str(&format!("train-counts={}\n", join(&counts)));
    for name in ["train.csv", "val.csv", "test.csv"] {
        manifest.push_str(&file_hash_line(&dir, name)?);
        manifest.push('\n');
    }
    for name in ["epochs.csv", "model.ckpt", "report.txt"] {
        manifest.push_str(&file_hash_line(&dir, name)?);
        manifest.push('\n');
    }
    write_file(&dir, "train_manifest.txt", &manifest)?;
    echo_config(cfg, &dir)?;

    let last = result.epochs.last().expect("epoch_max >= 1");
    println!(
        "trained loss={} seed={} epochs={} in {:.2}s",
        cfg.loss, cfg.seed, cfg.epoch_max, result.wall_seconds
    );
    println!(
        "final val accuracy={} macro_f={}",
        last.val_accuracy, last.val_macro_f
    );
    print!("{}", report.to_text());
    Ok(())
}

/// Loads a checkpoint and reports test-split metrics.
pub fn cmd_evaluate(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<(), CliError> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.out_dir);
    let ckpt = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join("model.ckpt"));
    require_file(&ckpt, "checkpoint")?;
    let model = MlpModel::load(&ckpt)?;
    let test = load_split(&dir, SplitChoice::Test)?;

    let report = evaluate(&model, &test)?;
    let confusion = confusion_of(&model, &test)?;
    write_file(&dir, "eval_report.txt", &report.to_text())?;
    write_file(&dir, "eval_confusion.csv", &confusion.to_csv())?;
    print!("{}", report.to_text());
    Ok(())
}

/// Per-α validation metric over the seed list: trains one model per
/// (seed, α), reports mean ± stddev per α, and the best α by mean (ties to
/// the smaller α). Seeds run sequentially in list order, so the output is
/// deterministic.
pub fn cmd_sweep_alpha(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.out_dir);
    let train = load_split(&dir, SplitChoice::Train)?
        .with_num_classes(cfg.classes)
        .map_err(|e| CliError::Runtime(format!("train.csv does not match config: {e}")))?;
    let val = load_split(&dir, SplitChoice::Val)?
        .with_num_classes(cfg.classes)
        .map_err(|e| CliError::Runtime(format!("val.csv does not match config: {e}")))?;

    let seeds = cfg.sweep_seeds();
    let base = cfg.train_config();
    // per_alpha[i][s] = metric of candidate i under seed s.
    let mut per_alpha = vec![Vec::with_capacity(seeds.len()); cfg.alphas.len()];
    for &seed in &seeds {
        let seeded = TrainConfig { seed, ..base.clone() };
        let selection = select_alpha(&train, &val, &cfg.alphas, &seeded)?;
        for (slot, row) in per_alpha.iter_mut().zip(selection.table.iter()) {
            slot.push(row.metric);
        }
    }

    let n = seeds.len() as f64;
    let stats: Vec<(f64, f64, f64)> = cfg
        .alphas
        .iter()
        .zip(per_alpha.iter())
        .map(|(&alpha, metrics)| {
            let mean = metrics.iter().sum::<f64>() / n;
            let variance = metrics.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
            (alpha, mean, variance.sqrt())
        })
        .collect();

    let mut best = stats[0];
    for &row in &stats[1..] {
        if row.1 > best.1 || (row.1 == best.1 && row.0 < best.0) {
            best = row;
        }
    }

    let mut csv = String::from("alpha,metric_mean,metric_std\n");
    for &(alpha, mean, std) in &stats {
        csv.push_str(&format!("{alpha},{mean},{std}\n"));
    }
    write_file(&dir, "sweep.csv", &csv)?;

    let best_text = format!(
        "best-alpha={}\nmetric={}\nmetric-mean={}\nmetric-std={}\nseeds={}\n",
        best.0,
        cfg.selection_metric,
        best.1,
        best.2,
        join(&seeds)
    );
    write_file(&dir, "sweep_best.txt", &best_text)?;
    echo_config(cfg, &dir)?;

    for &(alpha, mean, std) in &stats {
        println!("alpha={alpha} {}={mean} (\u{00b1}{std})", cfg.selection_metric);
    }
    println!("best alpha={} {}={} (\u{00b1}{})", best.0, cfg.selection_metric, best.1, best.2);
    Ok(())
}

/// Runs the model over one split and writes its penultimate-layer
/// activations, plus a per-class geometry summary on stdout.
pub fn cmd_dump_features(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    split: SplitChoice,
) -> Result<(), CliError> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.out_dir);
    let ckpt = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join("model.ckpt"));
    require_file(&ckpt, "checkpoint")?;
    let model = MlpModel::load(&ckpt)?;
    let dataset = load_split(&dir, split)?;

    let dump = dump_features(&model, &dataset, split.name())?;
    write_file(&dir, &format!("features_{}.csv", split.name()), &dump.to_csv())?;

    let spreads = class_centroid_spread(&dump)?;
    let norms = class_logit_norms(&model, &dataset)?;
    for (class, (spread, norm)) in spreads.iter().zip(norms.iter()).enumerate() {
        match (spread, norm) {
            (Some(s), Some(n)) => println!(
                "class={class} count={} centroid=({}) mean-radius={} mean-logit-norm={}",
                s.count,
                join(s.centroid.iter()),
                s.mean_radius,
                n
            ),
            _ => println!("class={class} absent"),
        }
    }
    Ok(())
}
