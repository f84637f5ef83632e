use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eht_core::pipeline::{self, ExperimentConfig, Output};
use eht_core::{Error, Result};

#[derive(Parser)]
#[command(name = "eht", version, about = "Entanglement Hamiltonian tomography of XXZ chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the chain parameters, couplings and spectral bounds.
    Model(Common),
    /// Prepare the target state.
    Prepare(Common),
    /// Sample the fit and holdout datasets (and calibration shots).
    Sample(Common),
    /// Fit the entanglement Hamiltonian of every configured subsystem.
    Fit(Common),
    /// Entropies, reference profiles and mutual information.
    Analyze(Common),
    /// Windowed fidelities of the fits against the holdout data.
    Verify(Common),
    /// Every stage in order, plus the manifest.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: minimal, figure1c-desk or figure3-desk.
    #[arg(long)]
    preset: Option<String>,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per setting; overrides the configuration.
    #[arg(long)]
    shots: Option<u64>,
}

/// Configurations with their run directories. A preset writes each of its
/// runs to a subdirectory named after it.
fn load(common: &Common, needs_seed: bool) -> Result<Vec<(ExperimentConfig, PathBuf)>> {
    let configs = match (&common.config, &common.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)?;
            vec![(cfg, common.out.clone())]
        }
        (None, Some(name)) => pipeline::preset(name)?
            .into_iter()
            .map(|cfg| {
                let dir = common.out.join(&cfg.name);
                (cfg, dir)
            })
            .collect(),
        _ => return Err(Error::InvalidParameter("give exactly one of --config and --preset".into())),
    };
    configs
        .into_iter()
        .map(|(mut cfg, dir)| {
            if let Some(seed) = common.seed {
                cfg.measurement.seed = Some(seed);
            }
            if let Some(shots) = common.shots {
                cfg.measurement.shots = shots;
            }
            cfg.validate()?;
            if needs_seed && cfg.measurement.seed.is_none() {
                return Err(Error::InvalidParameter("sampled runs need --seed or a configured seed".into()));
            }
            Ok((cfg, dir))
        })
        .collect()
}

fn run_stage(name: &str, common: &Common) -> Result<()> {
    let stage = pipeline::STAGES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| *f)
        .expect("stage exists");
    let needs_seed = matches!(name, "prepare" | "sample");
    for (cfg, dir) in load(common, needs_seed)? {
        let mut out = Output::new(&dir)?;
        stage(&cfg, &mut out)?;
        println!("{name}: {} -> {}", cfg.name, dir.display());
    }
    Ok(())
}

fn run_all(common: &Common) -> Result<()> {
    for (cfg, dir) in load(common, true)? {
        let manifest = pipeline::run_pipeline(&cfg, &dir)?;
        println!("run: {} -> {} ({} files)", cfg.name, dir.display(), manifest.files.len());
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Model(c) => run_stage("model", c),
        Command::Prepare(c) => run_stage("prepare", c),
        Command::Sample(c) => run_stage("sample", c),
        Command::Fit(c) => run_stage("fit", c),
        Command::Analyze(c) => run_stage("analyze", c),
        Command::Verify(c) => run_stage("verify", c),
        Command::Run(c) => run_all(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
