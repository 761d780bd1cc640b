//! Write-temp-then-rename file output.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Write `bytes` to `path` atomically: the content lands in a sibling temp
/// file first and is renamed into place, so readers never observe a partial
/// file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
