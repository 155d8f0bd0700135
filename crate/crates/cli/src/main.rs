use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lagrangekit_cli::config::OUT_ENV;
use lagrangekit_cli::{dispatch, resolve, CliError, Command, FileConfig, Flags};

#[derive(Parser)]
#[command(name = "lagrangekit", version, about = "Constrained optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Run one optimization and write its trace.
    Solve(CommonArgs),
    /// One run per axis value, aggregated into sweep.csv.
    Sweep(CommonArgs),
    /// Log-scale bisection over the penalty coefficient.
    Bisect(CommonArgs),
    /// Check a candidate point against the KKT conditions.
    Certify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (default: $LAGRANGEKIT_OUT, then the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record every K-th iterate in the trace.
    #[arg(long, value_name = "K")]
    stride: Option<usize>,
    /// Replay the recorded sparsity runs instead of training (bisect).
    #[arg(long)]
    stub: bool,
    /// Candidate point file, JSON {"x": [...], "lambda": [...], "mu": [...]} (certify).
    #[arg(long)]
    candidate: Option<PathBuf>,
}

fn execute(cmd: Command, a: CommonArgs) -> Result<u8, CliError> {
    let file = a.config.as_deref().map(FileConfig::load).transpose()?;
    let flags = Flags {
        seed: a.seed,
        jobs: a.jobs,
        out: a.out,
        stride: a.stride,
        stub: a.stub,
        candidate: a.candidate,
    };
    let cfg = resolve(cmd, file, flags, std::env::var_os(OUT_ENV).map(PathBuf::from))?;
    let outcome = dispatch(&cfg)?;
    print!("{}", outcome.stdout);
    Ok(outcome.code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::Solve(a) => (Command::Solve, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Bisect(a) => (Command::Bisect, a),
        Sub::Certify(a) => (Command::Certify, a),
    };
    match execute(cmd, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("lagrangekit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
