use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "hpe", version, about = "Certified solvers for monotone inclusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration; writes a JSONL trace and a summary.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, env = "HPE_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Replay a trace and check every certificate.
    Certify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a suite of configurations and write a CSV table.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { config, out } => hpe::cli::cmd_solve(&config, &out),
        Command::Certify { trace, config } => hpe::cli::cmd_certify(&trace, &config),
        Command::Bench { suite, out } => hpe::cli::cmd_bench(&suite, &out),
    };
    ExitCode::from(code as u8)
}
