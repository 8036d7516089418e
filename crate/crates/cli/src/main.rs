//! `pdhs`: run experiments, list presets, and check acceptance criteria.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use pdhs_core::experiment::{self, preset_source, run_criterion, ExperimentConfig, RunStatus, CRITERIA, PRESETS};

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BLOW_UP: u8 = 3;

#[derive(Parser)]
#[command(name = "pdhs", version, about = "Partially dissipative hyperbolic system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML file or a built-in preset name.
    Run {
        config: String,
        /// Dotted override, e.g. `--set grid.n=32`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Directory for `series.csv` and `report.json` (overrides the config's output paths).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in scenario presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Check one acceptance criterion (1-10), or `all`.
    Verify { criterion: String },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's TOML.
    Show {
        name: String,
    },
}

fn configure_workers() -> Result<()> {
    if let Ok(raw) = std::env::var("PDHS_WORKERS") {
        let n: usize = raw.parse().with_context(|| format!("PDHS_WORKERS must be a positive integer, got `{raw}`"))?;
        anyhow::ensure!(n > 0, "PDHS_WORKERS must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        log::info!("using {n} worker threads");
    }
    Ok(())
}

fn load_config(source: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let path = Path::new(source);
    if path.exists() {
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return ExperimentConfig::from_toml_with_overrides(&raw, overrides)
            .with_context(|| format!("in {}", path.display()));
    }
    match preset_source(source) {
        Ok(raw) => Ok(ExperimentConfig::from_toml_with_overrides(raw, overrides)?),
        Err(_) => Err(pdhs_core::Error::Config(format!("`{source}` is neither a file nor a preset")).into()),
    }
}

fn run_command(source: &str, overrides: &[String], out: Option<PathBuf>) -> Result<u8> {
    let mut cfg = load_config(source, overrides)?;
    if let Some(dir) = out {
        cfg.output.csv = Some(dir.join("series.csv"));
        cfg.output.report = Some(dir.join("report.json"));
    }
    let outcome = experiment::run(&cfg)?;
    let r = &outcome.report;
    println!("{}: {:?} at t = {}", r.name, r.status, r.t_final);
    println!("E_N = {:.6e}", r.e_n);
    for (name, fit) in &r.fits {
        println!("  {name:<24} {:?} {:+.4} (rms {:.2e})", fit.kind, fit.value, fit.residual);
    }
    if let Some(m0) = &r.m0 {
        println!("  M0 growth {:.4}, sup M0 / E_N = {:.4}", m0.growth, m0.report.constant);
    }
    if cfg.output.csv.is_none() && cfg.output.report.is_none() {
        print!("{}", outcome.csv());
    }
    Ok(match r.status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::BlowUp => EXIT_BLOW_UP,
    })
}

fn verify_command(which: &str) -> Result<u8> {
    let ids: Vec<u8> = if which == "all" {
        CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        vec![which
            .parse()
            .map_err(|_| pdhs_core::Error::Config(format!("criterion must be 1-10 or `all`, got `{which}`")))?]
    };
    let mut ok = true;
    for id in ids {
        let report = run_criterion(id)?;
        println!("{report}");
        ok &= report.passed;
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}

fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        matches!(
            e.downcast_ref::<pdhs_core::Error>(),
            Some(pdhs_core::Error::Config(_) | pdhs_core::Error::UnknownPreset(_))
        )
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_workers().and_then(|_| match cli.command {
        Command::Run { config, overrides, out } => run_command(&config, &overrides, out),
        Command::Presets { action: PresetAction::List } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(EXIT_OK)
        }
        Command::Presets { action: PresetAction::Show { name } } => {
            print!("{}", preset_source(&name)?);
            Ok(EXIT_OK)
        }
        Command::Verify { criterion } => verify_command(&criterion),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_config_error(&err) { EXIT_CONFIG } else { EXIT_FAILURE })
        }
    }
}
