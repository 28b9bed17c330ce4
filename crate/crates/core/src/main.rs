use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use moment_control::cli::{self, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "momentctl", version, about = "Moment-method null control for coupled 2x2 parabolic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Control truncation override.
    #[arg(long = "K")]
    modes: Option<usize>,
    /// Horizon override.
    #[arg(long = "T")]
    horizon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral table: indices, normalizations, tau and eigen-residuals.
    Analyze(Common),
    /// Controllability verdicts and minimal-time estimates.
    Classify(Common),
    /// Solve the moment problem and store the control.
    Synthesize(Common),
    /// Check a stored control against the configured thresholds.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Control file written by synthesize.
        #[arg(long)]
        control: PathBuf,
    },
    /// Observability quotients over the configured modes.
    Quotient(Common),
}

fn run(cli: Cli) -> moment_control::Result<cli::Outcome> {
    let load = |c: &Common| RunConfig::load(&c.config, &Overrides { seed: c.seed, modes: c.modes, horizon: c.horizon });
    match &cli.command {
        Command::Analyze(c) => cli::analyze(&load(c)?, &c.out),
        Command::Classify(c) => cli::cmd_classify(&load(c)?, &c.out),
        Command::Synthesize(c) => cli::synthesize(&load(c)?, &c.out),
        Command::Verify { common, control } => cli::verify(&load(common)?, control, &common.out),
        Command::Quotient(c) => cli::quotient(&load(c)?, &c.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
