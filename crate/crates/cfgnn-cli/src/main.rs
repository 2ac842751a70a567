use cfgnn::model::Variant;
use cfgnn_cli::{
    parse_ratio_list, run_evaluate, run_generate, run_spectra, run_sweep_ir, run_train, CliError,
};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cfgnn", version, about = "Class-Fourier spectral filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (feature CSV + edge CSV).
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model variant; writes checkpoint.json and history.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// base | v | e | global
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the config's dataset (test split).
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resample to each imbalance ratio, train, and tabulate metrics.
    SweepIr {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Repeatable: one model variant per occurrence (default: base, global).
        #[arg(long = "variant")]
        variants: Vec<String>,
        /// Comma-separated list, e.g. 0.1,0.3,0.5,0.7,0.9
        #[arg(long)]
        ratios: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the dataset graph's eigenvalues and eigenvector matrix.
    Spectra {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_variant(name: &str) -> Result<Variant, CliError> {
    name.parse().map_err(CliError::Config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, seed, out } => run_generate(&config, seed, &out),
        Command::Train { config, seed, variant, out } => {
            let variant = variant.as_deref().map(parse_variant).transpose()?;
            run_train(&config, seed, variant, &out)
        }
        Command::Evaluate { config, checkpoint, out } => run_evaluate(&config, &checkpoint, &out),
        Command::SweepIr { config, seed, variants, ratios, out } => {
            let variants = if variants.is_empty() {
                vec![Variant::Base, Variant::GlobalBaseline]
            } else {
                variants.iter().map(|v| parse_variant(v)).collect::<Result<Vec<_>, _>>()?
            };
            let ratios = parse_ratio_list(&ratios)?;
            run_sweep_ir(&config, seed, &variants, &ratios, &out)
        }
        Command::Spectra { config, seed, out } => run_spectra(&config, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
