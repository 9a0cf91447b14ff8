//! Command-line front end: configuration, the experiment commands and
//! result emission.

pub mod commands;
pub mod config;
pub mod record;

use std::fs;
use std::io;
use std::path::Path;

pub use commands::{cmd_bell, cmd_derive, cmd_dist, cmd_qkd, run, CliError};
pub use config::{
    parse_override, Arm, Command, ConfigError, ExperimentConfig, OutputFormat, ReflectionPhase,
    SourceKind,
};
pub use record::{RecordHeader, ResultEntry, ResultRecord};

/// Writes `contents` to a sibling temp file and renames it over `path`, so a
/// failed run never leaves a partial result file.
pub fn write_atomically(path: &Path, contents: &str) -> io::Result<()> {
    let file_name = path.file_name().ok_or_else(|| {
        io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name")
    })?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}
