//! Atomic file output and machine-readable errors.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(skip)]
    code: u8,
    pub error: String,
    pub message: String,
}

impl CliError {
    /// Bad flags or configuration; exit code 2.
    pub fn usage(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: 2,
            error: kind.into(),
            message: message.into(),
        }
    }

    /// Failure while running; exit code 1.
    pub fn runtime(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: 1,
            error: kind.into(),
            message: message.into(),
        }
    }

    /// Prints the error as one JSON line on stderr and returns the exit code.
    pub fn report(&self) -> u8 {
        let line = serde_json::to_string(self)
            .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.error));
        eprintln!("{line}");
        self.code
    }
}

impl From<gtiming::Error> for CliError {
    fn from(e: gtiming::Error) -> Self {
        Self::runtime(e.kind(), e.to_string())
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::runtime("io", format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
