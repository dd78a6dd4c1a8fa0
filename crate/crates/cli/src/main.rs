//! `molrl`: run pipeline stages against a run directory.
//!
//! Exit status is 0 on success, 1 on a usage or configuration error and 2
//! when a stage fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use molrl_core::pipeline::{run_stage, PipelineError, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "molrl", version, about = "Scaffold-seeded 3D molecule generation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Directory for data, checkpoints, generated molecules and reports.
    #[arg(long, value_name = "PATH", default_value = "run")]
    run_dir: PathBuf,
    /// Extra `key=value` override; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the toy corpus, labeled pocket/ligand pairs and target pocket.
    SynthData(Common),
    /// Teacher-forced training of the actor.
    TrainActor(Common),
    /// Train the graph-attention critic on the labeled pairs.
    TrainCritic(Common),
    /// Critic hyperparameter grid with AUROC per combination.
    GridSearch(Common),
    /// Critic-guided fine-tuning of the pretrained actor.
    RlFinetune(Common),
    /// Sample molecules from the actor named by `generate.source`.
    Generate(Common),
    /// Critic scores for a generated set.
    Score(Common),
    /// Validity, drug-likeness, top-k and plot data for generated sets.
    Evaluate(Common),
    /// One fine-tune per reward kind on shared seeds.
    Ablate(Common),
}

impl Command {
    fn split(self) -> (Stage, Common) {
        match self {
            Command::SynthData(c) => (Stage::SynthData, c),
            Command::TrainActor(c) => (Stage::TrainActor, c),
            Command::TrainCritic(c) => (Stage::TrainCritic, c),
            Command::GridSearch(c) => (Stage::GridSearch, c),
            Command::RlFinetune(c) => (Stage::RlFinetune, c),
            Command::Generate(c) => (Stage::Generate, c),
            Command::Score(c) => (Stage::Score, c),
            Command::Evaluate(c) => (Stage::Evaluate, c),
            Command::Ablate(c) => (Stage::Ablate, c),
        }
    }
}

fn load_config(c: &Common) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(&c.config).map_err(|e| format!("--config {}: {e}", c.config.display()))?;
    let mut overrides = Vec::new();
    for s in &c.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got {s:?}"))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = c.seed {
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    RunConfig::load(&text, &overrides).map_err(|e| format!("{}: {e}", c.config.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (stage, common) = cli.command.split();
    let cfg = match load_config(&common) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    match run_stage(stage, &cfg, &common.run_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(PipelineError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {} failed: {e}", stage.name());
            ExitCode::from(2)
        }
    }
}
