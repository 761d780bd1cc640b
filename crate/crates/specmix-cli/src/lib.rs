//! Command implementations behind the `specmix` binary.
//!
//! Each `cmd_*` function takes plain arguments and returns a report value;
//! the binary in `main.rs` only parses arguments, dispatches, prints and
//! maps errors to exit codes (0 success, 2 input error, 3 I/O error,
//! 4 numerical failure).

pub mod commands;
pub mod config;

pub use config::PipelineConfig;

/// A command failure: message plus process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn user(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn io_msg(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<specmix::Error> for CliError {
    fn from(err: specmix::Error) -> Self {
        use specmix::Error as E;
        let code = match &err {
            E::Io { .. } | E::MissingSpectrumFile { .. } => 3,
            E::RankDeficient { .. }
            | E::SingularSources { .. }
            | E::DegenerateSpectrum(_)
            | E::DegenerateReference
            | E::NearZeroSlope(_) => 4,
            _ => 2,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

pub(crate) fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::io_msg(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::io_msg(format!("cannot rename into {}: {e}", path.display())))
}

pub(crate) fn write_json_atomic<T: serde::Serialize>(
    path: &std::path::Path,
    value: &T,
) -> Result<(), CliError> {
    let body = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::user(format!("cannot serialize report: {e}")))?;
    write_atomic(path, &body)
}
