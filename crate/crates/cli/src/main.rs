use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stefan_cli::{config, report_error, run_dir, sweep, CliError, Verdict, OUTPUT_ROOT_ENV};
use stefan_core::presets::PRESETS;

/// Regularized Stefan problem laboratory: solve, measure the estimates, and
/// write plot-ready reports.
///
/// Exit status: 0 every check passed, 1 a check failed, 2 configuration
/// error, 3 solver failure. Errors are also printed to stderr as one JSON
/// record.
#[derive(Parser)]
#[command(name = "stefan-lab", version)]
struct Cli {
    /// Directory that relative `output` paths are resolved against.
    #[arg(long, env = OUTPUT_ROOT_ENV, default_value = ".", global = true)]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and run its checks.
    Run {
        config: PathBuf,
        /// Run directory; overrides `output` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cross product of the `[sweep]` axes and aggregate the results.
    Sweep {
        config: PathBuf,
        /// Axis as `name=v1,v2`; names p, eps, latent_heat, resolution,
        /// preset, draw. Replaces the same axis of the config.
        #[arg(long = "axis", value_name = "NAME=VALUES")]
        axes: Vec<String>,
        /// Sweep directory; overrides `output` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; all cores when absent.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List the built-in scenarios.
    Presets {
        /// Print the full scenarios as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn run(root: &Path, path: &Path, out: Option<&Path>) -> i32 {
    let loaded = match config::load(path) {
        Ok(l) => l,
        Err(e) => return report_error(&e, None),
    };
    let dir = run_dir(&loaded.config, root, out);
    match stefan_cli::execute(&loaded.config, &dir) {
        Ok(s) if s.status == Verdict::Pass => {
            println!("PASS {}", dir.display());
            0
        }
        Ok(s) => report_error(&CliError::Checks { failed: s.failed() }, Some(&dir)),
        Err(e) => report_error(&e, Some(&dir)),
    }
}

fn run_sweep(root: &Path, path: &Path, axes: &[String], out: Option<&Path>, jobs: Option<usize>) -> i32 {
    let mut loaded = match config::load(path) {
        Ok(l) => l,
        Err(e) => return report_error(&e, None),
    };
    for a in axes {
        if let Err(e) = sweep::apply_axis(&mut loaded.config.sweep, a) {
            return report_error(&e, None);
        }
    }
    if let Err(e) = loaded.config.validate() {
        return report_error(&e, None);
    }
    let dir = run_dir(&loaded.config, root, out);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let err = CliError::Config {
                message: e.to_string(),
                field: Some("jobs".into()),
            };
            return report_error(&err, None);
        }
    };
    match pool.install(|| sweep::execute(&loaded, &dir)) {
        Ok(_) => {
            println!("PASS {}", dir.display());
            0
        }
        Err(e) => report_error(&e, Some(&dir)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run { config, out } => run(&cli.output_root, config, out.as_deref()),
        Command::Sweep {
            config,
            axes,
            out,
            jobs,
        } => run_sweep(&cli.output_root, config, axes, out.as_deref(), *jobs),
        Command::Presets { json } => {
            if *json {
                let all: serde_json::Map<String, serde_json::Value> = PRESETS
                    .iter()
                    .map(|p| (p.name.to_string(), serde_json::to_value(p.scenario()).expect("serializes")))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&all).expect("serializes"));
            } else {
                for p in PRESETS {
                    println!("{:<24} {}", p.name, p.summary);
                }
            }
            0
        }
        Command::Validate { config } => match config::load(config) {
            Ok(l) => {
                let checks: Vec<&str> = l.config.checks().iter().map(|c| c.name()).collect();
                println!("valid: scenario {} checks {}", l.config.scenario.hash(), checks.join(","));
                0
            }
            Err(e) => report_error(&e, None),
        },
    };
    exit(code)
}
