//! Image-quality metrics, band errors and threshold segmentation overlap.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{arg_err, shape_err, Result};
use crate::frequency::{decompose, GaussianSpec};
use crate::volume::{normalize_ct, DomainTag, HuRange, Volume};

pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_RADIUS: usize = 5;
pub const SSIM_WINDOW: usize = 2 * SSIM_RADIUS + 1;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const DEFAULT_T_AIR: f64 = -200.0;
pub const DEFAULT_T_BONE: f64 = 200.0;

fn check_pair(a: &Volume, b: &Volume) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(shape_err!("volume dims {:?} and {:?} differ", a.dims(), b.dims()));
    }
    Ok(())
}

/// Mean absolute difference in HU.
pub fn mae(a: &Volume, b: &Volume) -> Result<f64> {
    a.expect_tag(DomainTag::CtHu)?;
    b.expect_tag(DomainTag::CtHu)?;
    check_pair(a, b)?;
    Ok(mean_abs_diff(a.data(), b.data()))
}

fn mean_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).abs()).sum();
    s / a.len() as f64
}

/// Voxelwise `|a - b|`.
pub fn error_map(a: &Volume, b: &Volume) -> Result<Volume> {
    check_pair(a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| (x - y).abs()).collect();
    a.with_data(data, a.tag())
}

/// `10 log10(1 / MSE)` on normalized volumes; identical inputs give `+inf`.
pub fn psnr(a: &Volume, b: &Volume) -> Result<f64> {
    a.expect_tag(DomainTag::CtNorm)?;
    b.expect_tag(DomainTag::CtNorm)?;
    check_pair(a, b)?;
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * Float::log10(mse))
}

fn ssim_taps() -> Vec<f64> {
    let r = SSIM_RADIUS as isize;
    (-r..=r)
        .map(|i| Float::exp(-((i * i) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)))
        .collect()
}

/// Gaussian-weighted local mean along one axis; the window is cut at the
/// volume boundary and renormalized over the remaining taps.
fn local_mean_axis(src: &[f64], dims: [usize; 3], axis: usize, taps: &[f64]) -> Vec<f64> {
    let r = SSIM_RADIUS as isize;
    let n = dims[axis] as isize;
    let stride = match axis {
        0 => dims[1] * dims[2],
        1 => dims[2],
        _ => 1,
    };
    let mut out = vec![0.0; src.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let pos = ((i / stride) % dims[axis]) as isize;
        let base = i as isize - pos * stride as isize;
        let (mut acc, mut wsum) = (0.0, 0.0);
        for t in -r..=r {
            let q = pos + t;
            if q < 0 || q >= n {
                continue;
            }
            let w = taps[(t + r) as usize];
            acc += w * src[(base + q * stride as isize) as usize];
            wsum += w;
        }
        *o = acc / wsum;
    }
    out
}

fn local_mean(src: &[f64], dims: [usize; 3], taps: &[f64]) -> Vec<f64> {
    let mut buf = local_mean_axis(src, dims, 0, taps);
    buf = local_mean_axis(&buf, dims, 1, taps);
    local_mean_axis(&buf, dims, 2, taps)
}

/// Mean local structural similarity with an 11-tap Gaussian window
/// (sigma 1.5) and dynamic range 1.
pub fn ssim(a: &Volume, b: &Volume) -> Result<f64> {
    a.expect_tag(DomainTag::CtNorm)?;
    b.expect_tag(DomainTag::CtNorm)?;
    check_pair(a, b)?;
    let dims = a.dims();
    if dims.iter().any(|&d| d < SSIM_WINDOW) {
        return Err(arg_err!(
            "SSIM needs every extent >= {SSIM_WINDOW}, got {dims:?}"
        ));
    }
    let taps = ssim_taps();
    let x: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mx = local_mean(&x, dims, &taps);
    let my = local_mean(&y, dims, &taps);
    let mxx = local_mean(&xx, dims, &taps);
    let myy = local_mean(&yy, dims, &taps);
    let mxy = local_mean(&xy, dims, &taps);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for i in 0..x.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let cxy = mxy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / x.len() as f64)
}

/// Three-class labelling: 0 air/background, 1 soft tissue, 2 bone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    pub dims: [usize; 3],
    pub classes: Vec<u8>,
}

impl SegmentationMask {
    pub fn histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for &c in &self.classes {
            h[c as usize] += 1;
        }
        h
    }
}

pub fn threshold_segment(ct: &Volume, t_air: f64, t_bone: f64) -> Result<SegmentationMask> {
    ct.expect_tag(DomainTag::CtHu)?;
    if !(t_air < t_bone) {
        return Err(arg_err!("air threshold {t_air} must be below bone threshold {t_bone}"));
    }
    let classes = ct
        .data()
        .iter()
        .map(|&v| {
            let v = v as f64;
            if v < t_air {
                0
            } else if v < t_bone {
                1
            } else {
                2
            }
        })
        .collect();
    Ok(SegmentationMask {
        dims: ct.dims(),
        classes,
    })
}

/// Per-class Dice overlap; a class absent from both masks scores 1.
pub fn dice(a: &SegmentationMask, b: &SegmentationMask) -> Result<[f64; 3]> {
    if a.dims != b.dims {
        return Err(shape_err!("mask dims {:?} and {:?} differ", a.dims, b.dims));
    }
    let mut inter = [0usize; 3];
    let mut na = [0usize; 3];
    let mut nb = [0usize; 3];
    for (&p, &q) in a.classes.iter().zip(&b.classes) {
        na[p as usize] += 1;
        nb[q as usize] += 1;
        if p == q {
            inter[p as usize] += 1;
        }
    }
    Ok(core::array::from_fn(|c| {
        if na[c] + nb[c] == 0 {
            1.0
        } else {
            2.0 * inter[c] as f64 / (na[c] + nb[c]) as f64
        }
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub range: HuRange,
    /// Gaussian sigma of the band split used for per-band errors.
    pub sigma: f64,
    pub t_air: f64,
    pub t_bone: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            range: HuRange::default(),
            sigma: 2.0,
            t_air: DEFAULT_T_AIR,
            t_bone: DEFAULT_T_BONE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// HU.
    pub mae: f64,
    /// dB on normalized volumes; `+inf` for identical inputs.
    pub psnr: f64,
    pub ssim: f64,
    /// HU.
    pub mae_high: f64,
    /// HU.
    pub mae_low: f64,
    pub dice: [f64; 3],
    /// Voxels of either volume clamped while normalizing.
    pub clamp_count: usize,
    pub provenance: Vec<(String, String)>,
}

/// Band errors in HU: `(mae_low, mae_high)`.
pub fn band_errors(pred: &Volume, gt: &Volume, spec: &GaussianSpec) -> Result<(f64, f64)> {
    check_pair(pred, gt)?;
    let p = decompose(pred, spec)?;
    let g = decompose(gt, spec)?;
    Ok((
        mean_abs_diff(p.low.data(), g.low.data()),
        mean_abs_diff(p.high.data(), g.high.data()),
    ))
}

/// All metrics for a synthetic CT against ground truth, both in HU.
pub fn evaluate(pred: &Volume, gt: &Volume, config: &EvalConfig) -> Result<MetricsReport> {
    let mae = mae(pred, gt)?;
    let spec = GaussianSpec::new(config.sigma)?;
    let (mae_low, mae_high) = band_errors(pred, gt, &spec)?;
    let pn = normalize_ct(pred, &config.range)?;
    let gn = normalize_ct(gt, &config.range)?;
    let dice = dice(
        &threshold_segment(pred, config.t_air, config.t_bone)?,
        &threshold_segment(gt, config.t_air, config.t_bone)?,
    )?;
    Ok(MetricsReport {
        mae,
        psnr: psnr(&pn.volume, &gn.volume)?,
        ssim: ssim(&pn.volume, &gn.volume)?,
        mae_high,
        mae_low,
        dice,
        clamp_count: pn.clamped + gn.clamped,
        provenance: Vec::new(),
    })
}
