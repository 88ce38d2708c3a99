use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nucsense::experiments::{ExperimentConfig, EXPERIMENT_NAMES};
use nucsense_cli::{
    apply_env_seed, apply_overrides, cmd_experiment, cmd_process, cmd_simulate, exit_code_for,
    from_document, SimulateConfig,
};

/// Pulsed spin-lock magnetometry simulators and the acquisition pipeline.
#[derive(Parser)]
#[command(name = "nucsense", version, about)]
struct Cli {
    /// Worker threads for sweep grids (default: logical cores). Results are
    /// identical for any value.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the JSON configuration.
    #[arg(long)]
    config: PathBuf,

    /// Dotted-path overrides, e.g. --set train.tau=7.3e-5 --set seed=7.
    /// NUCSENSE_SEED in the environment overrides the config seed.
    #[arg(long = "set")]
    overrides: Vec<String>,

    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one engine over a pulse train and write trace + spectrum CSVs.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run a named experiment recipe (resonance-sweep, fres-vs-tp,
    /// harmonic-scaling, duty-cycle, chirp-response, sensitivity).
    Experiment {
        name: String,
        #[command(flatten)]
        config: ConfigArgs,
        /// Exit nonzero if any fit is flagged as failed.
        #[arg(long)]
        strict: bool,
    },
    /// Process a raw record container: extract -> decompose -> spectrum.
    Process {
        /// Path to the .nsrw raw record container.
        input: PathBuf,
        /// Moving-average window for the decay split, seconds [default: 73 ms].
        #[arg(long, default_value_t = 73e-3)]
        window: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Validate a configuration file and exit.
    ValidateConfig {
        config: PathBuf,
        /// Which schema to check: simulate or experiment.
        #[arg(long, default_value = "simulate")]
        kind: String,
    },
}

fn load_document(path: &PathBuf, overrides: &[String]) -> nucsense::Result<serde_json::Value> {
    let text = std::fs::read_to_string(path)?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)?;
    apply_overrides(&mut doc, overrides)?;
    apply_env_seed(&mut doc)?;
    Ok(doc)
}

fn run() -> Result<bool, nucsense::Error> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::Simulate { config } => {
            let doc = load_document(&config.config, &config.overrides)?;
            let cfg: SimulateConfig = from_document(doc.clone())?;
            cfg.validate()?;
            let outcome = cmd_simulate(doc, &cfg, &config.out)?;
            eprintln!("wrote {}", outcome.manifest_path.display());
            Ok(false)
        }
        Command::Experiment {
            name,
            config,
            strict,
        } => {
            if !EXPERIMENT_NAMES.contains(&name.as_str()) {
                return Err(nucsense::Error::invalid(
                    "experiment",
                    format!(
                        "unknown experiment {name:?}; valid names: {}",
                        EXPERIMENT_NAMES.join(", ")
                    ),
                ));
            }
            let doc = load_document(&config.config, &config.overrides)?;
            let cfg: ExperimentConfig = from_document(doc.clone())?;
            let outcome = cmd_experiment(&name, doc, &cfg, &config.out)?;
            eprintln!("wrote {}", outcome.manifest_path.display());
            Ok(strict && outcome.flagged)
        }
        Command::Process { input, window, out } => {
            let outcome = cmd_process(&input, window, &out)?;
            eprintln!("wrote {}", outcome.manifest_path.display());
            Ok(false)
        }
        Command::ValidateConfig { config, kind } => {
            let doc = load_document(&config, &[])?;
            match kind.as_str() {
                "simulate" => {
                    let cfg: SimulateConfig = from_document(doc)?;
                    cfg.validate()?;
                }
                "experiment" => {
                    let _cfg: ExperimentConfig = from_document(doc)?;
                }
                other => {
                    return Err(nucsense::Error::invalid(
                        "kind",
                        format!("{other:?} is not simulate or experiment"),
                    ))
                }
            }
            eprintln!("config ok");
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
