use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use facegcn_core::pipeline::{
    cmd_eval, cmd_preprocess, cmd_synth, cmd_train, with_thread_limit, PipelineError, RunConfig,
};

/// Dynamic 3D face identification with spatio-temporal graph convolutions.
#[derive(Debug, Parser)]
#[command(name = "facegcn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset into `paths.data`.
    Synth(Common),
    /// Convert raw mesh sequences under `paths.input` into tensor caches.
    Preprocess(Common),
    /// Train on the configured split and write checkpoints to `paths.run`.
    Train(Common),
    /// Score a checkpoint and write the accuracy report.
    Eval(Common),
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Configuration file (TOML). Built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(common: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let (Command::Synth(common) | Command::Preprocess(common) | Command::Train(common) | Command::Eval(common)) =
        &cli.command;
    let cfg = load(common)?;
    if common.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let force = common.force;
    with_thread_limit(|| match &cli.command {
        Command::Synth(_) => {
            let m = cmd_synth(&cfg, force)?;
            println!(
                "wrote {} samples ({} landmarks, k = {}) to {}",
                m.samples.len(),
                m.landmarks,
                m.k,
                cfg.data_dir().display()
            );
            Ok(())
        }
        Command::Preprocess(_) => {
            let m = cmd_preprocess(&cfg, force)?;
            println!(
                "wrote {} sequences ({} landmarks, k = {}) to {}",
                m.samples.len(),
                m.landmarks,
                m.k,
                cfg.data_dir().display()
            );
            Ok(())
        }
        Command::Train(_) => {
            let out = cmd_train(&cfg, force, &mut std::io::stdout())?;
            if let Some(s) = out.subsets {
                println!("mean accuracy over {} emotion subsets: {:.4}", s.runs.len(), s.mean_accuracy);
            }
            println!("checkpoints in {}", cfg.run_dir().display());
            Ok(())
        }
        Command::Eval(_) => {
            let r = cmd_eval(&cfg)?;
            for e in &r.per_emotion {
                println!("emotion {}: {}/{} ({:.4})", e.emotion, e.correct, e.total, e.accuracy);
            }
            println!("accuracy {}/{} = {:.4}", r.correct, r.total, r.accuracy);
            println!("report written to {}", cfg.report_path().display());
            Ok(())
        }
    })?
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
