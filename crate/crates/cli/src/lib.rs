//! Configuration loading, experiment orchestration and result emission for
//! the `drmdp` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod output;

use std::fs;
use std::io::Write;
use std::path::Path;

use config::load_config;
use error::CliError;
use experiment::{run_experiment, Overrides};
use output::write_sweep_csv;

/// Exit code when every asserted invariant holds.
pub const EXIT_PASS: i32 = 0;
/// Exit code when an asserted invariant fails.
pub const EXIT_FAIL: i32 = 1;

/// `run <config>`: executes the experiment, writes its record and CSV
/// projection, and returns the exit code.
pub fn run(config_path: &Path, overrides: &Overrides) -> Result<i32, CliError> {
    let loaded = load_config(config_path)?;
    let outcome = run_experiment(&loaded, overrides)?;
    let line = output::to_json_line(&outcome.record);
    let out = overrides.output.clone().or_else(|| loaded.config.output.clone().map(|p| loaded.base_dir.join(p)));
    match out {
        Some(path) => {
            let mut f = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            writeln!(f, "{line}").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        None => println!("{line}"),
    }
    if let Some(csv) = &loaded.config.csv {
        if !outcome.sweep.is_empty() {
            let path = loaded.base_dir.join(csv);
            let f = fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            write_sweep_csv(f, &outcome.sweep).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
    }
    Ok(if outcome.record.pass { EXIT_PASS } else { EXIT_FAIL })
}

/// `validate <config>`: parses and checks the configuration without solving.
pub fn validate(config_path: &Path) -> Result<(), CliError> {
    let loaded = load_config(config_path)?;
    loaded.config.validate()?;
    loaded.config.build_mdp()?;
    Ok(())
}
