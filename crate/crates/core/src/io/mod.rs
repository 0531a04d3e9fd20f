//! File formats and run configuration.

pub mod pgm;
pub mod runconfig;
pub mod tensor;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::DepthGrid;

pub use pgm::PgmImage;
pub use runconfig::RunConfig;
pub use tensor::{RawTensor, TensorData};

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn named<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => Error::Format(format!("{}: {other}", path.display())),
    })
}

pub fn read_tensor(path: &Path) -> Result<RawTensor> {
    named(path, RawTensor::decode(&read(path)?))
}

pub fn write_tensor(path: &Path, tensor: &RawTensor) -> Result<()> {
    write_atomic(path, &tensor.encode())
}

pub fn read_depth(path: &Path) -> Result<DepthGrid> {
    named(path, pgm::decode_depth(&read(path)?))
}

pub fn write_depth(path: &Path, depth: &DepthGrid) -> Result<()> {
    let bytes = named(path, pgm::encode_depth(depth))?;
    write_atomic(path, &bytes)
}

/// Reads a tensor and converts it, naming the file in any error.
pub fn read_as<T>(path: &Path, convert: impl FnOnce(&RawTensor) -> Result<T>) -> Result<T> {
    let t = read_tensor(path)?;
    named(path, convert(&t))
}
