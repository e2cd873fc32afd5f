//! Gaussian low-pass filtering and the exact two-band split of a volume.
//!
//! `low` is a separable Gaussian blur with edge replication; `high` is the
//! residual. The pair is built so that `low + high` reproduces the source
//! bit for bit in `f32`.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{arg_err, Result};
use crate::volume::{DomainTag, Volume};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    /// Standard deviation in voxels.
    pub sigma: f64,
    /// Taps per side.
    pub radius: usize,
}

impl Default for GaussianSpec {
    fn default() -> Self {
        Self::new(15.0).expect("positive sigma")
    }
}

impl GaussianSpec {
    /// Truncates at `ceil(3 sigma)` taps per side (at least one).
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(arg_err!("Gaussian sigma must be positive and finite, got {sigma}"));
        }
        let radius = Float::ceil(3.0 * sigma).max(1.0) as usize;
        Ok(Self { sigma, radius })
    }

    pub fn with_radius(sigma: f64, radius: usize) -> Result<Self> {
        let mut s = Self::new(sigma)?;
        if radius == 0 {
            return Err(arg_err!("Gaussian radius must be at least 1"));
        }
        s.radius = radius;
        Ok(s)
    }

    /// Normalized taps `w[-r..=r]`, summing to one.
    pub fn taps(&self) -> Vec<f64> {
        let r = self.radius as isize;
        let raw: Vec<f64> = (-r..=r)
            .map(|i| Float::exp(-((i * i) as f64) / (2.0 * self.sigma * self.sigma)))
            .collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / s).collect()
    }
}

/// The low/high split of a CT volume.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPair {
    pub low: Volume,
    pub high: Volume,
}

/// One 1D pass along `axis` with edge replication.
fn blur_axis(src: &[f64], dims: [usize; 3], axis: usize, taps: &[f64]) -> Vec<f64> {
    let r = taps.len() / 2;
    let [d, h, w] = dims;
    let stride = match axis {
        0 => h * w,
        1 => w,
        _ => 1,
    };
    let len = dims[axis];
    let mut out = vec![0.0; src.len()];
    let mut line = vec![0.0; len + 2 * r];
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let pos = [z, y, x];
                if pos[axis] != 0 {
                    continue;
                }
                let base = (z * h + y) * w + x;
                for (i, l) in line.iter_mut().enumerate() {
                    let j = (i as isize - r as isize).clamp(0, len as isize - 1) as usize;
                    *l = src[base + j * stride];
                }
                for i in 0..len {
                    let mut acc = 0.0;
                    for (t, &wt) in taps.iter().enumerate() {
                        acc += wt * line[i + t];
                    }
                    out[base + i * stride] = acc;
                }
            }
        }
    }
    out
}

/// Separable Gaussian blur (depth, then height, then width) with edge
/// replication. Accumulates in `f64`.
pub fn gaussian_lowpass(v: &Volume, spec: &GaussianSpec) -> Result<Volume> {
    let taps = GaussianSpec::with_radius(spec.sigma, spec.radius)?.taps();
    let mut buf: Vec<f64> = v.data().iter().map(|&x| x as f64).collect();
    for axis in 0..3 {
        buf = blur_axis(&buf, v.dims(), axis, &taps);
    }
    v.with_data(buf.into_iter().map(|x| x as f32).collect(), v.tag())
}

/// Largest `low` near `l` for which `low + high` rounds back to `v`.
fn reconciled_low(v: f32, high: f32, l: f32) -> f32 {
    if l + high == v {
        return l;
    }
    let mut up = l;
    let mut down = l;
    for _ in 0..4 {
        up = next_up(up);
        if up + high == v {
            return up;
        }
        down = next_down(down);
        if down + high == v {
            return down;
        }
    }
    l
}

fn next_up(x: f32) -> f32 {
    if x.is_nan() || x == f32::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f32::from_bits(1);
    }
    let b = x.to_bits();
    f32::from_bits(if x > 0.0 { b + 1 } else { b - 1 })
}

fn next_down(x: f32) -> f32 {
    -next_up(-x)
}

/// Splits a CT volume into Gaussian low-pass and residual high-pass bands.
pub fn decompose(v: &Volume, spec: &GaussianSpec) -> Result<FrequencyPair> {
    if !matches!(v.tag(), DomainTag::CtHu | DomainTag::CtNorm) {
        return Err(crate::error::Error::Domain {
            expected: "CT_HU or CT_NORM",
            found: v.tag().name(),
        });
    }
    let blurred = gaussian_lowpass(v, spec)?;
    let mut low = Vec::with_capacity(v.len());
    let mut high = Vec::with_capacity(v.len());
    for (&x, &b) in v.data().iter().zip(blurred.data()) {
        let h = x - b;
        low.push(reconciled_low(x, h, x - h));
        high.push(h);
    }
    Ok(FrequencyPair {
        low: v.with_data(low, DomainTag::CtLowFreq)?,
        high: v.with_data(high, DomainTag::CtHighFreq)?,
    })
}

impl FrequencyPair {
    /// `low + high`, elementwise.
    pub fn reconstruct(&self) -> Vec<f32> {
        self.low.data().iter().zip(self.high.data()).map(|(&a, &b)| a + b).collect()
    }
}

/// Sum of absolute differences between neighbouring voxels along all axes.
pub fn total_variation(v: &Volume) -> f64 {
    let [d, h, w] = v.dims();
    let mut tv = 0.0;
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let c = v.at(z, y, x) as f64;
                if z + 1 < d {
                    tv += (v.at(z + 1, y, x) as f64 - c).abs();
                }
                if y + 1 < h {
                    tv += (v.at(z, y + 1, x) as f64 - c).abs();
                }
                if x + 1 < w {
                    tv += (v.at(z, y, x + 1) as f64 - c).abs();
                }
            }
        }
    }
    tv
}
