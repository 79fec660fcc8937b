//! On-disk core cache, one file per image.
//!
//! ```text
//! magic "CSCC" | u32 version (1) | u32 k | u32 width | u32 height
//! f32 rows[width*height][k]   (row-major pixel order)
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::core::Core;
use crate::binio::{ByteReader, ByteWriter, Truncation};
use crate::error::{with_path, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"CSCC";
pub const CACHE_VERSION: u32 = 1;

pub fn encode_core_cache(core: &Core) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(CACHE_MAGIC);
    w.u32(CACHE_VERSION);
    w.len(core.k());
    w.len(core.width);
    w.len(core.height);
    w.buf.reserve(core.features.len() * 4);
    for &v in core.features.iter() {
        w.f32(v as f32);
    }
    w.buf
}

pub fn decode_core_cache(bytes: &[u8]) -> Result<Core> {
    let mut r = ByteReader::new(bytes, "core cache", Truncation::Format);
    r.magic(CACHE_MAGIC)?;
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let (k, width, height) = (r.len()?, r.len()?, r.len()?);
    if k == 0 || width == 0 || height == 0 {
        return Err(r.err(format!("empty core {k}x{width}x{height}")));
    }
    let count = k
        .checked_mul(width)
        .and_then(|v| v.checked_mul(height))
        .ok_or_else(|| r.err("core size overflows"))?;
    let data = r.f32_vec(count)?;
    r.finish()?;
    let features = Array2::from_shape_vec((width * height, k), data).expect("length checked");
    Ok(Core {
        width,
        height,
        features,
    })
}

pub fn write_core_cache(path: &Path, core: &Core) -> Result<()> {
    fs::write(path, encode_core_cache(core)).map_err(|e| with_path(e.into(), path))
}

pub fn read_core_cache(path: &Path) -> Result<Core> {
    let bytes = fs::read(path).map_err(|e| with_path(e.into(), path))?;
    decode_core_cache(&bytes).map_err(|e| with_path(e, path))
}
