//! `qcka`: simulate N-BB84 conference key sessions, distill keys and run
//! the batch studies.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 configuration or usage
//! error, 3 no key (infeasible length, not enough key for the pad),
//! 4 reconciliation failure (no usable code rate, decoding or verification).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qcka::Error;

#[derive(Parser, Debug)]
#[command(name = "qcka", version, about = "N-party conference key agreement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Also write gnuplot scripts next to the CSV tables.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SessionOverrides {
    /// Override the number of rounds (exact).
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Override the type-2 round probability.
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a measurement session and write the round ledger.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        session: SessionOverrides,
    },
    /// Parameter estimation on a ledger, with the finite-key bound.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Ledger file; defaults to `<out>/ledger.bin`.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Reconcile, verify and amplify a ledger into per-party key files.
    Postprocess {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Evaluate the asymptotic and finite-key rates.
    Keyrate(commands::KeyrateArgs),
    /// Finite-key sweep over the configured round counts.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Q_X surface over the link noise split at fixed total noise.
    Surface(commands::SurfaceArgs),
    /// One-time-pad encrypt a file with a key file.
    Encrypt(commands::PadArgs),
    /// One-time-pad decrypt a ciphertext with a key file.
    Decrypt(commands::PadArgs),
    /// AKR study over the reference topologies plus a full session run.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        session: SessionOverrides,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        Error::NoKey(_) | Error::NotKeyGrowing { .. } | Error::KeyUsage(_) => 3,
        Error::NoCode(_) | Error::EcFailure { .. } | Error::NotConverged { .. } | Error::VerificationFailed => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common, session } => commands::simulate(&common, &session),
        Command::Estimate { common, ledger } => commands::estimate(&common, ledger),
        Command::Postprocess { common, ledger } => commands::postprocess(&common, ledger),
        Command::Keyrate(a) => commands::keyrate(&a),
        Command::Sweep { common } => commands::sweep(&common),
        Command::Surface(a) => commands::surface(&a),
        Command::Encrypt(a) => commands::encrypt(&a),
        Command::Decrypt(a) => commands::decrypt(&a),
        Command::Report { common, session } => commands::report(&common, &session),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("qcka: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
