//! The `FSV1` volume file format.
//!
//! Layout (little-endian): magic `FSV1`, version `u32 = 1`, extents
//! `D, H, W` as `u32`, spacing as three `f32`, a domain tag byte, seven
//! reserved zero bytes, then `D * H * W` `f32` samples with width fastest.

use std::fs;
use std::path::Path;

use freqsynth_core::{DomainTag, Volume};

use crate::bytes::{put_f32s, put_u32, Reader};
use crate::error::{Error, FormatError, FormatErrorKind, Result};

pub const MAGIC: &[u8; 4] = b"FSV1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

pub fn encode_volume(v: &Volume) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * v.len());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    for d in v.dims() {
        put_u32(&mut out, u32::try_from(d).expect("volume extent exceeds u32"));
    }
    for s in v.spacing() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.push(v.tag() as u8);
    out.extend_from_slice(&[0; 7]);
    put_f32s(&mut out, v.data());
    out
}

pub fn decode_volume(buf: &[u8]) -> Result<Volume, FormatError> {
    let mut r = Reader::new(buf);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(FormatError::new(4, FormatErrorKind::UnsupportedVersion(version)));
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let at = r.offset();
        *d = r.u32()? as usize;
        if *d == 0 {
            return Err(FormatError::invalid(at, format!("extent {i} is zero")));
        }
    }
    let mut spacing = [0f32; 3];
    for s in &mut spacing {
        let at = r.offset();
        *s = r.f32()?;
        if !(s.is_finite() && *s > 0.0) {
            return Err(FormatError::invalid(at, format!("spacing {s} is not positive")));
        }
    }
    let tag_byte = r.u8()?;
    let tag = DomainTag::from_u8(tag_byte)
        .ok_or_else(|| FormatError::invalid(32, format!("unknown domain tag {tag_byte}")))?;
    let reserved = r.take(7)?;
    if let Some(i) = reserved.iter().position(|&b| b != 0) {
        return Err(FormatError::invalid(33 + i as u64, "reserved header byte is not zero"));
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| FormatError::new(8, FormatErrorKind::DimensionOverflow))?;
    let data = r.f32s(n)?;
    r.finish()?;
    Volume::new(dims, spacing, data, tag)
        .map_err(|e| FormatError::invalid(HEADER_LEN as u64, e.to_string()))
}

pub fn write_volume(v: &Volume, path: &Path) -> Result<()> {
    fs::write(path, encode_volume(v)).map_err(|e| Error::io(path, e))
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_volume(&buf).map_err(|e| Error::format(path, e))
}
