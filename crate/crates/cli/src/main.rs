//! `longtail` — generate imbalanced synthetic datasets, train small MLP
//! classifiers under different losses, and inspect the results.
//!
//! Every config value has a matching flag; flags override the config file,
//! which overrides the built-in defaults. Exit codes: 0 success, 1 usage or
//! config error, 2 runtime error.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use longtail_cli::commands::{self, CliError};
use longtail_cli::config::{
    ExperimentConfig, ImbalanceChoice, LossChoice, MetricChoice, ScheduleChoice, SplitChoice,
};

#[derive(Parser)]
#[command(
    name = "longtail",
    version,
    about = "Class-imbalanced training with outlying squared-error targets"
)]
struct Cli {
    /// TOML config file; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Base RNG seed for data generation and training
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training loss
    #[arg(long, global = true, value_enum)]
    loss: Option<LossChoice>,
    /// Outlying-target scale (required by --loss mse-ol)
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,

    /// Number of classes
    #[arg(long, global = true)]
    classes: Option<usize>,
    /// Feature dimension
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Class means as "x,y;x,y;..." (default: unit circle)
    #[arg(long, global = true, value_name = "LIST")]
    means: Option<String>,
    /// Mixture component standard deviation
    #[arg(long, global = true)]
    stddev: Option<f64>,
    /// Imbalance profile of the train split
    #[arg(long, global = true, value_enum)]
    imbalance: Option<ImbalanceChoice>,
    /// Imbalance ratio (most/least frequent)
    #[arg(long, global = true)]
    ratio: Option<f64>,
    /// Samples in the most frequent class
    #[arg(long, global = true)]
    n_max: Option<usize>,
    /// Validation samples per class
    #[arg(long, global = true)]
    val_per_class: Option<usize>,
    /// Test samples per class
    #[arg(long, global = true)]
    test_per_class: Option<usize>,
    /// Focal-loss focusing exponent
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Base learning rate
    #[arg(long, global = true)]
    lr_base: Option<f64>,
    /// Number of training epochs
    #[arg(long, global = true)]
    epoch_max: Option<usize>,
    /// Mini-batch size
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// SGD momentum, in [0, 1)
    #[arg(long, global = true)]
    momentum: Option<f64>,
    /// L2 weight decay
    #[arg(long, global = true)]
    weight_decay: Option<f64>,
    /// Learning-rate schedule
    #[arg(long, global = true, value_enum)]
    schedule: Option<ScheduleChoice>,
    /// Hidden layer widths, comma separated (e.g. 16,2)
    #[arg(long, global = true, value_delimiter = ',', value_name = "W,W,...")]
    hidden: Option<Vec<usize>>,
    /// Validation metric that picks the best alpha
    #[arg(long, global = true, value_enum)]
    selection_metric: Option<MetricChoice>,
    /// Seed list for sweeps, comma separated
    #[arg(long, global = true, value_delimiter = ',', value_name = "S,S,...")]
    seeds: Option<Vec<u64>>,
    /// Alpha candidates for sweeps, comma separated
    #[arg(long, global = true, value_delimiter = ',', value_name = "A,A,...")]
    alphas: Option<Vec<f64>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/val/test CSV splits and a manifest
    Generate,
    /// Train a model on the generated splits and report on the test split
    Train,
    /// Evaluate a saved checkpoint on the test split
    Evaluate {
        /// Checkpoint path (default: <out>/model.ckpt)
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Train once per (seed, alpha) and rank the alpha candidates
    SweepAlpha,
    /// Write penultimate-layer activations for one split
    DumpFeatures {
        /// Checkpoint path (default: <out>/model.ckpt)
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Which split to run through the model
        #[arg(long, value_enum, default_value = "test")]
        split: SplitChoice,
    },
}

fn parse_means(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';')
        .map(|point| {
            point
                .split(',')
                .map(|coord| {
                    coord.trim().parse::<f64>().map_err(|_| {
                        CliError::Usage(format!("cannot parse mean coordinate {coord:?}"))
                    })
                })
                .collect()
        })
        .collect()
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    macro_rules! override_from {
        ($($flag:ident => $field:ident),* $(,)?) => {
            $(if let Some(value) = &cli.$flag {
                cfg.$field = value.clone();
            })*
        };
    }
    override_from! {
        seed => seed,
        loss => loss,
        out => out_dir,
        classes => classes,
        dim => dim,
        stddev => stddev,
        imbalance => imbalance,
        ratio => ratio,
        n_max => n_max,
        val_per_class => val_per_class,
        test_per_class => test_per_class,
        gamma => gamma,
        lr_base => lr_base,
        epoch_max => epoch_max,
        batch_size => batch_size,
        momentum => momentum,
        weight_decay => weight_decay,
        schedule => schedule,
        hidden => hidden,
        selection_metric => selection_metric,
        seeds => seeds,
        alphas => alphas,
    }
    if let Some(alpha) = cli.alpha {
        cfg.alpha = Some(alpha);
    }
    if let Some(means) = &cli.means {
        cfg.means = Some(parse_means(means)?);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::Generate => commands::cmd_generate(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Evaluate { checkpoint } => commands::cmd_evaluate(&cfg, checkpoint.as_deref()),
        Command::SweepAlpha => commands::cmd_sweep_alpha(&cfg),
        Command::DumpFeatures { checkpoint, split } => {
            commands::cmd_dump_features(&cfg, checkpoint.as_deref(), *split)
        }
    }
}

fn main() {
    // Die quietly when a downstream reader closes the pipe (`longtail ... |
    // head`); Rust's runtime ignores SIGPIPE by default, turning every
    // truncated pipe into a stdout panic.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
