use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use florafill::pipeline::{run_command, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Harvest,
    BuildCorpus,
    TrainDetector,
    Detect,
    Extract,
    Evaluate,
    FnStudy,
    Demo,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Harvest => Command::Harvest,
            Cmd::BuildCorpus => Command::BuildCorpus,
            Cmd::TrainDetector => Command::TrainDetector,
            Cmd::Detect => Command::Detect,
            Cmd::Extract => Command::Extract,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::FnStudy => Command::FnStudy,
            Cmd::Demo => Command::Demo,
        }
    }
}

/// Fill species-trait matrices from web text.
#[derive(Debug, Parser)]
#[command(name = "florafill", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the mock search, web and model; never touch the network.
    #[arg(long)]
    offline: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run_command(args.command.into(), &args.config, args.seed, args.offline) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
