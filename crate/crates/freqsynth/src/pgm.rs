//! 8-bit binary PGM export of axial slices.

use std::fs;
use std::path::Path;

use freqsynth_core::Volume;

use crate::error::{Error, Result};

/// Maps slice `z` linearly from `[lo, hi]` onto `0..=255`. A degenerate
/// window maps everything to 0.
pub fn slice_to_gray(v: &Volume, z: usize, lo: f32, hi: f32) -> Result<Vec<u8>> {
    let [d, h, w] = v.dims();
    if z >= d {
        return Err(freqsynth_core::Error::Argument(format!("slice {z} out of range (depth {d})")).into());
    }
    let plane = &v.data()[z * h * w..(z + 1) * h * w];
    let span = f64::from(hi) - f64::from(lo);
    Ok(plane
        .iter()
        .map(|&x| {
            if !(span > 0.0) {
                return 0;
            }
            let t = ((f64::from(x) - f64::from(lo)) / span).clamp(0.0, 1.0);
            (t * 255.0).round() as u8
        })
        .collect())
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel count does not match image size");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Writes slice `z`, windowed to the min and max of the whole volume.
pub fn write_slice(v: &Volume, z: usize, path: &Path) -> Result<()> {
    let (lo, hi) = v.min_max();
    write_slice_windowed(v, z, lo, hi, path)
}

pub fn write_slice_windowed(v: &Volume, z: usize, lo: f32, hi: f32, path: &Path) -> Result<()> {
    let [_, h, w] = v.dims();
    let px = slice_to_gray(v, z, lo, hi)?;
    fs::write(path, encode_pgm(w, h, &px)).map_err(|e| Error::io(path, e))
}
