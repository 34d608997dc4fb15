use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coauthor::pipeline::{PipelineConfig, PipelineError, Run, Stage};

const OUT_ENV: &str = "COAUTHOR_OUT";

/// Forecast researchers' coauthor and publication counts.
#[derive(Debug, Parser)]
#[command(name = "coauthor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config and $COAUTHOR_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the input corpus into the canonical JSONL form.
    Ingest(Common),
    /// Slice researchers and compute the empirical rate matrices.
    Matrices(Common),
    /// Fit the λ and ζ rate matrices.
    Train(Common),
    /// Search for the cumulative-advantage hyperparameters.
    Tune(Common),
    /// Simulate test researchers forward.
    Predict(Common),
    /// Compare forecasts with observed outcomes.
    Evaluate(Common),
    /// Collate headline numbers and draw figures.
    Report(Common),
    /// Draw a corpus from the model.
    Synth(Common),
    /// Run every stage in order.
    Pipeline(Common),
}

fn run(command: Command) -> Result<Vec<String>, PipelineError> {
    let (stage, common) = match command {
        Command::Ingest(c) => (Some(Stage::Ingest), c),
        Command::Matrices(c) => (Some(Stage::Matrices), c),
        Command::Train(c) => (Some(Stage::Train), c),
        Command::Tune(c) => (Some(Stage::Tune), c),
        Command::Predict(c) => (Some(Stage::Predict), c),
        Command::Evaluate(c) => (Some(Stage::Evaluate), c),
        Command::Report(c) => (Some(Stage::Report), c),
        Command::Synth(c) => (Some(Stage::Synth), c),
        Command::Pipeline(c) => (None, c),
    };
    let mut cfg = PipelineConfig::load(&common.config)?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    let out = common
        .out
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(PipelineError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    let run = Run::new(cfg, out);
    match stage {
        Some(s) => Ok(vec![run.stage(s)?]),
        None => run.pipeline(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
