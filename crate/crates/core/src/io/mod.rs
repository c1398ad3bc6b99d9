//! Persistence and export: the binary tensor container, JSON scene
//! configuration, and CSV/SVG sinks for traces, events, and heatmaps.
//!
//! All writers are atomic (temp file in the target directory, then
//! rename) and deterministic: identical inputs produce byte-identical
//! files.

pub mod export;
pub mod scene;
pub mod tensor_file;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::array::ArrayError;
use crate::geometry::GeometryError;
use crate::sounder::SounderError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic, not a BMT1 tensor file")]
    BadMagic,
    #[error("unsupported mode count {0}, expected 3 or 4")]
    BadModeCount(u32),
    #[error("unknown value kind {0}, expected 0 (complex) or 1 (power)")]
    BadValueKind(u32),
    #[error("invalid tensor sizes: {0}")]
    SizeOverflow(String),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("{0} trailing bytes after the payload")]
    TrailingBytes(u64),
    #[error("inconsistent header: {0}")]
    HeaderMismatch(String),
    #[error("scene file: {0}")]
    SceneSchema(String),
    #[error("export: {0}")]
    Export(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Trace(#[from] crate::blocktrace::BlocktraceError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    Sounder(#[from] SounderError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Writes `bytes` to `path` atomically: the data lands in a temporary
/// file in the same directory and is renamed into place, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}
