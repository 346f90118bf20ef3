//! Command-line front end: dataset generation, training, evaluation,
//! the three-model benchmark and the smoothing experiment.

pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use geogwl::pipeline::ModelKind;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] geogwl::Error),
}

impl CliError {
    /// 1 usage or configuration, 2 invalid data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use geogwl::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::Io(_) | E::Json(_) => 1,
                E::Validation(_) | E::Shape(_) => 2,
                E::Numerical(_) => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "geogwl", version, about = "Geographically weighted graph learning toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat JSON config; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset CSV and its metadata.
    Generate(Common),
    /// Train one model on a dataset CSV.
    Train {
        #[command(flatten)]
        common: Common,
        /// geoggnn, nn or cnn.
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: PathBuf,
    },
    /// Score a saved model on the test split of a dataset.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model_path: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Training trace for the loss chart; defaults to the one saved
        /// beside the model.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Generate, train all three models and tabulate test metrics.
    Benchmark(Common),
    /// Run the kernel smoothing experiment.
    Smoothlab(Common),
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    RunConfig::load(c.config.as_deref(), c.seed, c.out.as_deref())
}

/// Runs one command and returns a short human-readable summary.
pub fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Generate(c) => {
            let path = commands::generate(&load(&c)?)?;
            Ok(format!("wrote {}", path.display()))
        }
        Command::Train { common, model, data } => {
            let cfg = load(&common)?;
            let kind: ModelKind = model.parse().map_err(|e: geogwl::Error| CliError::Usage(e.to_string()))?;
            let o = commands::train(&cfg, kind, &data)?;
            Ok(format!(
                "wrote {} and {} (best epoch {})",
                o.model.display(),
                o.trace.display(),
                o.best_epoch
            ))
        }
        Command::Evaluate {
            common,
            model_path,
            data,
            trace,
        } => {
            let cfg = load(&common)?;
            let r = commands::evaluate(&cfg, &model_path, &data, trace.as_deref())?;
            Ok(format!(
                "test accuracy {:.4}, macro F1 {:.4}; results in {}",
                r.accuracy,
                r.f1_macro,
                cfg.out.display()
            ))
        }
        Command::Benchmark(c) => Ok(commands::benchmark(&load(&c)?)?.to_text()),
        Command::Smoothlab(c) => {
            let s = commands::smoothlab(&load(&c)?)?;
            Ok(format!(
                "{} trials, noise {}: win rate {:.3}",
                s.trials, s.noise_std, s.win_rate
            ))
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
