//! `clocknet`: run, validate and list clock-network scenarios.
//!
//! Exit codes: 0 success, 2 parse, 3 validation, 4 runtime or output error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clocknet_core::scenario::{self, OutputFormat, ScenarioConfig, ScenarioError, PRESETS};

/// Default output directory when neither `--out` nor `[output].dir` is given.
const OUT_DIR_ENV: &str = "CLOCKNET_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "clocknet",
    version,
    about = "Squeezed and entangled optical clock network simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file or a built-in preset and write CSV/JSON results.
    Run {
        /// Path to a TOML scenario, or the name of a preset.
        scenario: String,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory. Falls back to `[output].dir`, then $CLOCKNET_OUT_DIR, then `.`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv, json or both.
        #[arg(long)]
        format: Option<OutputFormat>,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: String },
    /// List built-in scenarios.
    Presets {
        /// Print the TOML of each preset.
        #[arg(long)]
        show: bool,
    },
}

fn load(arg: &str) -> Result<ScenarioConfig, ScenarioError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(cfg) = scenario::preset(arg) {
            return Ok(cfg);
        }
    }
    scenario::parse_scenario(path)
}

fn output_dir(flag: Option<PathBuf>, cfg: &ScenarioConfig) -> PathBuf {
    flag.or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn execute(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::Run {
            scenario: arg,
            seed,
            out,
            format,
        } => {
            let mut cfg = load(&arg)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let dir = output_dir(out, &cfg);
            let format = format.or(cfg.output.format).unwrap_or_default();
            let (record, files) = scenario::run_to_dir(&cfg, &dir, format)?;
            for q in &record.outputs {
                let v = match &q.value {
                    scenario::Value::Number(v) => v.to_string(),
                    scenario::Value::Flag(b) => b.to_string(),
                    scenario::Value::Text(t) => t.clone(),
                };
                println!("{:<32} {v} {}", q.name, q.unit);
            }
            for path in files.csv.iter().chain(&files.json).chain(&files.extra) {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Validate { scenario: arg } => {
            let cfg = load(&arg)?;
            println!("ok: mode {} hash {}", cfg.mode.name(), cfg.hash());
        }
        Command::Presets { show } => {
            for (name, text) in PRESETS {
                if show {
                    println!("# {name}\n{text}");
                } else {
                    println!("{name}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
