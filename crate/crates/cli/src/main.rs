use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use postselect_cli::app::{execute, Command, Options};

/// Simulate and score postselected phase transmission over noisy channels.
#[derive(Parser)]
#[command(name = "postselect", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Transmit a waveform or a fixed phase and score the decoded output.
    Run(Args),
    /// Evaluate a grid over photon number, basis separation, channel parameter and threshold.
    Sweep(Args),
    /// Tabulate the noise sums and slope of the configured channels.
    ChannelInfo(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Uses exact probabilities in place of photon counting.
    #[arg(long)]
    exact: bool,
    /// Directory for output files; created if missing.
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Run(a) => (Command::Run, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::ChannelInfo(a) => (Command::ChannelInfo, a),
    };
    let opts = Options {
        config: args.config,
        seed: args.seed,
        exact: args.exact,
        out: args.out,
    };
    match execute(cmd, &opts) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", report.text);
            for p in &report.written {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
