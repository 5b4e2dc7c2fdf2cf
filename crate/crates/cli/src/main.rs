//! `latentreg`: synthesize data, train, evaluate and inspect
//! attribute-regularized VAEs.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::{Part, TraverseArgs};
use config::{ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "latentreg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set train.weights.gamma=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for training and synthesis (overrides `train.seed`, `data.synth.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut overrides = self.overrides.clone();
        if let Some(out) = &self.out {
            overrides.push(format!("output_dir={}", serde_json::to_string(out).expect("path")));
        }
        if let Some(seed) = self.seed {
            overrides.push(format!("train.seed={seed}"));
            overrides.push(format!("data.synth.seed={seed}"));
        }
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

#[derive(Args, Clone)]
struct Source {
    /// Checkpoint directory (default `<output_dir>/checkpoint`).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset directory (default from the config).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Part of the dataset to use.
    #[arg(long, value_enum, default_value = "test")]
    part: Part,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic annulus cohort.
    Synth(Common),
    /// Train a model and write a checkpoint plus loss logs.
    Train(Common),
    /// Compute the metric report of a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
    },
    /// Decode latent interpolations and attribute scans.
    Traverse {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        /// Interpolate between two sample ids.
        #[arg(long, num_args = 2, value_names = ["ID_A", "ID_B"])]
        between: Option<Vec<String>>,
        /// Attribute to scan (repeatable).
        #[arg(long)]
        scan: Vec<String>,
        /// Sample whose code is scanned (default: first sample).
        #[arg(long)]
        sample: Option<String>,
        #[arg(long, default_value_t = 7)]
        steps: usize,
        /// Central quantile coverage of the scan range.
        #[arg(long, default_value_t = 0.98)]
        coverage: f64,
        /// Add a row of attention overlays under each scan.
        #[arg(long)]
        attend: bool,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Write attention overlays for samples.
    Attend {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        /// Sample ids (repeatable).
        #[arg(long = "sample", required = true)]
        samples: Vec<String>,
        /// Attributes (default: every mapped attribute).
        #[arg(long = "attr")]
        attributes: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Scatter two attributes' latent dimensions.
    Project {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        #[arg(long = "x")]
        attr_x: String,
        #[arg(long = "y")]
        attr_y: String,
    },
    /// Train and score one model per loss-weight grid point.
    Sweep(Common),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let checkpoint_of = |config: &RunConfig, s: &Source| {
        s.checkpoint.clone().unwrap_or_else(|| config.output_dir.join("checkpoint"))
    };
    match cli.command {
        Command::Synth(c) => commands::synth(&c.resolve()?),
        Command::Train(c) => commands::train(&c.resolve()?),
        Command::Sweep(c) => commands::sweep(&c.resolve()?).map(drop),
        Command::Eval { common, source } => {
            let config = common.resolve()?;
            let loaded = commands::load(&config, &checkpoint_of(&config, &source), source.data.as_deref(), source.part)?;
            commands::eval(&loaded, &config.output_dir).map(drop)
        }
        Command::Traverse {
            common,
            source,
            between,
            scan,
            sample,
            steps,
            coverage,
            attend,
            alpha,
        } => {
            let config = common.resolve()?;
            let loaded = commands::load(&config, &checkpoint_of(&config, &source), source.data.as_deref(), source.part)?;
            let args = TraverseArgs {
                between: between.as_ref().map(|v| (v[0].as_str(), v[1].as_str())),
                scan: &scan,
                sample: sample.as_deref(),
                steps,
                coverage,
                attend,
                alpha,
            };
            commands::traverse(&loaded, &args, &config.output_dir).map(drop)
        }
        Command::Attend {
            common,
            source,
            samples,
            attributes,
            alpha,
        } => {
            let config = common.resolve()?;
            let loaded = commands::load(&config, &checkpoint_of(&config, &source), source.data.as_deref(), source.part)?;
            commands::attend(&loaded, &samples, &attributes, alpha, &config.output_dir).map(drop)
        }
        Command::Project {
            common,
            source,
            attr_x,
            attr_y,
        } => {
            let config = common.resolve()?;
            let loaded = commands::load(&config, &checkpoint_of(&config, &source), source.data.as_deref(), source.part)?;
            commands::project(&loaded, &attr_x, &attr_y, &config.output_dir).map(drop)
        }
    }
}

/// 2 for configuration problems, 3 for numerical failure, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    use latentreg_core::Error as E;
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(E::InvalidConfig { .. } | E::UnknownAttribute(_) | E::InvalidArgument(_)) => 2,
        Some(E::NonFiniteLoss { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
