//! `popsynth`: generate planted data, train and sample the generative
//! models, evaluate populations and run the benchmark protocol.
//!
//! Every command reads an optional JSON config (`--config`), applies flag
//! overrides on top, and echoes the resolved config into its output
//! directory. Exit codes: 0 success, 1 validation or usage error, 2 I/O
//! error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use popsynth_core::numeric::HiddenActivation;
use popsynth_core::{ModelKind, Variant};

use config::{layered, CliResult, Overrides};

#[derive(Parser)]
#[command(
    name = "popsynth",
    version,
    about = "Conditional population synthesis with CVAE, CGAN and empirical baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Arbitrary override of a dotted config key, e.g. `cvae.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Hyperparameter flags, applied to whichever model is trained.
#[derive(Args)]
struct Hyper {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    hidden_layers: Option<usize>,
    #[arg(long)]
    hidden_units: Option<usize>,
    /// CVAE latent size.
    #[arg(long)]
    bottleneck_dim: Option<usize>,
    /// CVAE KL weight.
    #[arg(long)]
    beta: Option<f64>,
    /// CGAN noise size.
    #[arg(long)]
    noise_dim: Option<usize>,
    #[arg(long, value_parser = parse_activation)]
    activation: Option<HiddenActivation>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a planted synthetic dataset and its schema.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        /// Number of records.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Train a CVAE or CGAN and persist it with its loss traces.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_kind)]
        model: Option<ModelKind>,
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        schema: Option<PathBuf>,
        /// Validation CSV enabling best-checkpoint selection.
        #[arg(long, value_name = "PATH")]
        validation: Option<PathBuf>,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// Draw agents from a saved model for each row of a conditionals CSV.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Saved model directory.
        #[arg(long, value_name = "DIR")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        conditionals: Option<PathBuf>,
        #[arg(long)]
        n_per_row: Option<usize>,
    },
    /// Compare a synthetic population against a reference population.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        samples: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
        /// Training set for the zero-sample rate.
        #[arg(long, value_name = "PATH")]
        train: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        schema: Option<PathBuf>,
    },
    /// Full benchmark: split, cross-validation, test and application sets.
    Protocol {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_records: Option<usize>,
        /// Data variants, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
        variants: Option<Vec<Variant>>,
    },
    /// Hyperparameter grid search with K-fold selection.
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_kind)]
        model: Option<ModelKind>,
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        schema: Option<PathBuf>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown variant `{s}` (expected original or extended)"))
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown model `{s}` (expected cvae or cgan)"))
}

fn parse_activation(s: &str) -> Result<HiddenActivation, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown activation `{s}` (expected elu, relu or sigmoid)"))
}

impl Common {
    fn overrides(&self, seed_key: &str) -> Overrides {
        let mut o = Overrides::default();
        o.set_opt(seed_key, self.seed);
        o.set_opt("out", self.out.as_ref());
        o
    }

    /// `--set` pairs go last so they win over named flags.
    fn resolve(&self, mut o: Overrides) -> CliResult<serde_json::Value> {
        for s in &self.set {
            o.set_raw(s)?;
        }
        layered(self.config.as_deref(), o)
    }
}

impl Hyper {
    fn apply(&self, o: &mut Overrides) {
        o.set_opt("training.epochs", self.epochs);
        o.set_opt("training.batch_size", self.batch_size);
        o.set_opt("training.learning_rate", self.learning_rate);
        o.set_opt("training.hidden_layers", self.hidden_layers);
        o.set_opt("training.hidden_units", self.hidden_units);
        o.set_opt("training.bottleneck_dim", self.bottleneck_dim);
        o.set_opt("training.beta", self.beta);
        o.set_opt("training.noise_dim", self.noise_dim);
        o.set_opt("training.activation", self.activation);
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::GenData { common, variant, n } => {
            let mut o = common.overrides("seed");
            o.set_opt("variant", variant);
            o.set_opt("n", n);
            commands::gen_data(common.resolve(o)?)
        }
        Command::Train {
            common,
            model,
            data,
            schema,
            validation,
            hyper,
        } => {
            let mut o = common.overrides("training.seed");
            o.set_opt("training.model", model);
            o.set_opt("data", data);
            o.set_opt("schema", schema);
            o.set_opt("validation", validation);
            hyper.apply(&mut o);
            commands::train(common.resolve(o)?)
        }
        Command::Sample {
            common,
            model,
            conditionals,
            n_per_row,
        } => {
            let mut o = common.overrides("seed");
            o.set_opt("model", model);
            o.set_opt("conditionals", conditionals);
            o.set_opt("n_per_row", n_per_row);
            commands::sample(common.resolve(o)?)
        }
        Command::Evaluate {
            common,
            samples,
            truth,
            train,
            schema,
        } => {
            let mut o = common.overrides("seed");
            o.set_opt("samples", samples);
            o.set_opt("truth", truth);
            o.set_opt("train", train);
            o.set_opt("schema", schema);
            let mut value = common.resolve(o)?;
            // Evaluation draws nothing; a seed is accepted for uniformity.
            if let Some(m) = value.as_object_mut() {
                m.remove("seed");
            }
            commands::evaluate_cmd(value)
        }
        Command::Protocol {
            common,
            n_records,
            variants,
        } => {
            let mut o = common.overrides("seed");
            o.set_opt("n_records", n_records);
            o.set_opt("variants", variants);
            commands::protocol(common.resolve(o)?)
        }
        Command::Grid {
            common,
            model,
            data,
            schema,
        } => {
            let mut o = common.overrides("seed");
            o.set_opt("model", model);
            o.set_opt("data", data);
            o.set_opt("schema", schema);
            commands::grid(common.resolve(o)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
