use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use platoon_cli::config::{parse_config, OutputFormat, RunConfig};
use platoon_cli::output::execute_all;
use platoon_cli::{presets, report, CliError};

/// Longitudinal platoon simulator: commercial ACC versus connected ACC.
#[derive(Parser)]
#[command(name = "platoon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a preset or config file and write its artifacts.
    Run {
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Preset name; replaces the scenario of --config if both are given.
        #[arg(long, value_name = "NAME")]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "DIR", env = "PLATOON_OUT")]
        out: Option<PathBuf>,
        /// Artifacts to write; repeatable. Defaults to all.
        #[arg(long = "format", value_enum, value_name = "FORMAT")]
        formats: Vec<OutputFormat>,
        /// Parallel runs for sweeps.
        #[arg(long, short = 'j')]
        jobs: Option<usize>,
    },
    /// Compare finished runs (run directories or trace files).
    Report {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Print the shipped presets.
    ListPresets,
}

fn load_config(config: Option<&Path>, preset: Option<&str>) -> Result<RunConfig, CliError> {
    let mut cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
            parse_config(&text).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?
        }
        None => match preset {
            Some(name) => RunConfig::from_preset(name)?,
            None => return Err(CliError::Config("one of --config or --preset is required".into())),
        },
    };
    if let (Some(name), Some(_)) = (preset, config) {
        let base = RunConfig::from_preset(name)?.base;
        cfg.base = base;
        cfg.expand()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, preset, seed, out, formats, jobs } => {
            let mut cfg = load_config(config.as_deref(), preset.as_deref())?;
            if seed.is_some() {
                cfg.seed = seed;
            }
            if !formats.is_empty() {
                cfg.formats = formats;
            }
            let out = out.or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let plans = cfg.expand()?;
            let workers = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

            let mut collisions = Vec::new();
            let mut first_error = None;
            for result in execute_all(&plans, &out, &cfg.formats, workers) {
                match result {
                    Ok(outcome) => {
                        let r = &outcome.report;
                        println!(
                            "{}: rms_last={:.4} min_R={:.2} string_stable={} tfc={:.0} -> {}",
                            outcome.name,
                            r.last_vehicle().rms_accel,
                            r.min_range(),
                            r.string_stable,
                            r.tfc,
                            outcome.dir.display()
                        );
                        if let Some(t) = outcome.collision_t {
                            eprintln!("{}: collision at t = {t:.2} s", outcome.name);
                            collisions.push(outcome.name);
                        }
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        first_error.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_error {
                return Err(e);
            }
            if !collisions.is_empty() {
                return Err(CliError::Collision(collisions));
            }
            Ok(())
        }
        Command::Report { traces } => {
            let rows = traces.iter().map(|p| report::load(p)).collect::<Result<Vec<_>, _>>()?;
            for w in report::compatibility_warnings(&rows) {
                eprintln!("{w}");
            }
            print!("{}", report::render_table(&rows));
            Ok(())
        }
        Command::ListPresets => {
            for (name, about) in presets::PRESETS {
                println!("{name:<24} {about}");
            }
            Ok(())
        }
    }
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
