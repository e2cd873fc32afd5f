//! Seeded paired MR/CT phantoms: smooth blob anatomy with thin bright
//! shells on the CT side.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{arg_err, Result};
use crate::rng::SplitMix64;
use crate::volume::{DomainTag, HuRange, Volume};

/// Minimum extent per axis.
pub const MIN_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub dims: [usize; 3],
    pub seed: u64,
    pub n_blobs: usize,
    /// HU added on blob-boundary shells.
    pub shell_contrast: f64,
    /// Standard deviation of additive MR noise.
    pub noise_sigma: f64,
    pub spacing: [f32; 3],
    pub range: HuRange,
}

impl GeneratorSpec {
    pub fn new(dims: [usize; 3], seed: u64) -> Self {
        Self {
            dims,
            seed,
            n_blobs: 6,
            shell_contrast: 1200.0,
            noise_sigma: 0.02,
            spacing: [1.0; 3],
            range: HuRange::default(),
        }
    }

    /// Same spec with another seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Gradient magnitude (field units per voxel) above which a voxel is shell.
pub const SHELL_THRESHOLD: f64 = 0.2;

struct Blob {
    center: [f64; 3],
    scale: f64,
    amplitude: f64,
}

fn latent_field(spec: &GeneratorSpec, rng: &mut SplitMix64) -> Vec<f64> {
    let [d, h, w] = spec.dims;
    let min_dim = d.min(h).min(w) as f64;
    let blobs: Vec<Blob> = (0..spec.n_blobs)
        .map(|_| Blob {
            center: [
                rng.uniform(0.2, 0.8) * (d - 1) as f64,
                rng.uniform(0.2, 0.8) * (h - 1) as f64,
                rng.uniform(0.2, 0.8) * (w - 1) as f64,
            ],
            scale: rng.uniform(0.1, 0.22) * min_dim,
            amplitude: rng.uniform(0.6, 1.2),
        })
        .collect();
    let mut f = vec![0.0; d * h * w];
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let p = [z as f64, y as f64, x as f64];
                f[(z * h + y) * w + x] = blobs
                    .iter()
                    .map(|b| {
                        let r2: f64 = (0..3).map(|a| (p[a] - b.center[a]) * (p[a] - b.center[a])).sum();
                        b.amplitude * Float::exp(-r2 / (2.0 * b.scale * b.scale))
                    })
                    .sum();
            }
        }
    }
    f
}

fn gradient_magnitude(f: &[f64], dims: [usize; 3]) -> Vec<f64> {
    let [d, h, w] = dims;
    let at = |z: usize, y: usize, x: usize| f[(z * h + y) * w + x];
    let diff = |lo: f64, hi: f64, span: usize| (hi - lo) / span as f64;
    let mut g = vec![0.0; f.len()];
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let (z0, z1) = (z.saturating_sub(1), (z + 1).min(d - 1));
                let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
                let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let gz = diff(at(z0, y, x), at(z1, y, x), z1 - z0);
                let gy = diff(at(z, y0, x), at(z, y1, x), y1 - y0);
                let gx = diff(at(z, y, x0), at(z, y, x1), x1 - x0);
                g[(z * h + y) * w + x] = Float::sqrt(gz * gz + gy * gy + gx * gx);
            }
        }
    }
    g
}

/// Raw MR and HU CT for one seeded phantom. CT values are whole HU.
pub fn generate_pair(spec: &GeneratorSpec) -> Result<(Volume, Volume)> {
    if spec.dims.iter().any(|&n| n < MIN_DIM) {
        return Err(arg_err!("phantom dims {:?} must be at least {MIN_DIM} per axis", spec.dims));
    }
    if !(spec.noise_sigma >= 0.0) || !spec.shell_contrast.is_finite() {
        return Err(arg_err!("noise and shell contrast must be finite and non-negative"));
    }
    let root = SplitMix64::new(spec.seed);
    let field = latent_field(spec, &mut root.split(0));
    let grad = gradient_magnitude(&field, spec.dims);

    let mut noise = root.split(1);
    let mr: Vec<f32> = field
        .iter()
        .map(|&f| {
            let n = if spec.noise_sigma > 0.0 { spec.noise_sigma * noise.normal() } else { 0.0 };
            (1.0 + Float::tanh(1.5 * f) + n) as f32
        })
        .collect();

    let range = &spec.range;
    let ct: Vec<f32> = field
        .iter()
        .zip(&grad)
        .map(|(&f, &g)| {
            let mut hu = -1000.0 + 1040.0 * (1.0 - Float::exp(-3.0 * f));
            if g >= SHELL_THRESHOLD {
                hu += spec.shell_contrast;
            }
            Float::round(hu).clamp(Float::ceil(range.min_hu), Float::floor(range.max_hu)) as f32
        })
        .collect();

    let mr = Volume::new(spec.dims, spec.spacing, mr, DomainTag::MrRaw)?;
    let ct = Volume::new(spec.dims, spec.spacing, ct, DomainTag::CtHu)?;
    Ok((mr, ct))
}
