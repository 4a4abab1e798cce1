use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spts::experiment::{run_and_write, Command, ExperimentConfig};
use spts::Error;

#[derive(Parser)]
#[command(name = "spts", version, about = "Single-pixel tactile skin experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the tactile dictionary on the synthetic corpus.
    DictTrain(Args),
    /// Object classification accuracy against M.
    ClassifySweep(Args),
    /// Support accuracy against M, split by contact area.
    SupportSweep(Args),
    /// Ball bounce tracking at several frame sizes.
    Bounce(Args),
    /// Contact localization error against M.
    Localize(Args),
    /// Progressive reconstruction of one scene.
    Adapt(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u32>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::NoContact | Error::Io(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::DictTrain(a) => (Command::DictTrain, a),
        Cmd::ClassifySweep(a) => (Command::ClassifySweep, a),
        Cmd::SupportSweep(a) => (Command::SupportSweep, a),
        Cmd::Bounce(a) => (Command::Bounce, a),
        Cmd::Localize(a) => (Command::Localize, a),
        Cmd::Adapt(a) => (Command::Adapt, a),
    };
    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("spts: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    match run_and_write(command, &cfg, args.jobs) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("spts {command}: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
