//! Configuration, orchestration and serialization behind the `rabicrit`
//! binary.

pub mod bundle;
pub mod config;
pub mod error;
pub mod runner;

use std::fs;
use std::path::{Path, PathBuf};

pub use bundle::{table_csv, write_bundle, Bundle, Cell, Metadata, Table};
pub use config::{parse_config, Format, RunConfig};
pub use error::{CliError, ConfigIssue};
pub use runner::{run_subcommand, Subcommand};

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Runs `cmd` and writes its tables. `out` and `format` override the
/// `[output]` section.
pub fn execute(
    cmd: Subcommand,
    cfg: &RunConfig,
    out: Option<&Path>,
    format: Option<Format>,
    jobs: usize,
) -> Result<Vec<PathBuf>, CliError> {
    let bundle = run_subcommand(cmd, cfg, jobs)?;
    let dir = out.unwrap_or(&cfg.output.dir);
    write_bundle(&bundle, dir, format.unwrap_or(cfg.output.format))
}
