//! On-disk formats: 16-bit mask PNGs, 8-bit RGB PNGs and LTZ latent files.

pub mod ltz;
pub mod mask_png;
pub mod rgb_png;

use std::path::Path;

use crate::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
