//! Configuration, pipeline and sweep driver behind the `stefan-lab` binary.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod pipeline;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use config::{load, parse, CheckKind, Loaded, RunConfig};
pub use error::{CliError, ErrorRecord};
pub use pipeline::{execute, Summary, Verdict};

/// Environment variable that overrides the output root.
pub const OUTPUT_ROOT_ENV: &str = "STEFANLAB_OUTPUT_ROOT";

/// `explicit` if given, else `output` of the config below `root`.
pub fn run_dir(config: &RunConfig, root: &Path, explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => root.join(&config.output),
    }
}

/// Writes `error.json` into `dir` when it can, and returns the exit status.
pub fn report_error(err: &CliError, dir: Option<&Path>) -> i32 {
    let record = err.record();
    let line = serde_json::to_string(&record).expect("serializes");
    eprintln!("{line}");
    if let Some(d) = dir {
        if std::fs::create_dir_all(d).is_ok() {
            let _ = std::fs::write(d.join("error.json"), format!("{line}\n"));
        }
    }
    record.status
}
