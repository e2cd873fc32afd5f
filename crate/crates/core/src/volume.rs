//! Scalar volumes and intensity normalization between scanner and network
//! domains.

use alloc::vec::Vec;

use crate::error::{arg_err, shape_err, Error, Result};
use crate::tensor::Tensor;

/// Intensity domain of a volume's samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DomainTag {
    MrRaw = 0,
    MrNorm = 1,
    CtHu = 2,
    CtNorm = 3,
    CtHighFreq = 4,
    CtLowFreq = 5,
}

impl DomainTag {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => Self::MrRaw,
            1 => Self::MrNorm,
            2 => Self::CtHu,
            3 => Self::CtNorm,
            4 => Self::CtHighFreq,
            5 => Self::CtLowFreq,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::MrRaw => "MR_RAW",
            Self::MrNorm => "MR_NORM",
            Self::CtHu => "CT_HU",
            Self::CtNorm => "CT_NORM",
            Self::CtHighFreq => "CT_HIGHFREQ",
            Self::CtLowFreq => "CT_LOWFREQ",
        }
    }
}

/// Tolerance on the `[0, 1]` range of normalized CT data.
pub const CT_NORM_SLACK: f32 = 1e-6;

/// A `D x H x W` grid of `f32` samples, depth-major with width fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing: [f32; 3],
    data: Vec<f32>,
    tag: DomainTag,
}

impl Volume {
    pub fn new(dims: [usize; 3], spacing: [f32; 3], data: Vec<f32>, tag: DomainTag) -> Result<Self> {
        if dims.contains(&0) {
            return Err(shape_err!("volume extents must be positive, got {dims:?}"));
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| shape_err!("volume extents {dims:?} overflow"))?;
        if n != data.len() {
            return Err(shape_err!("dims {dims:?} need {n} samples, got {}", data.len()));
        }
        if spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(arg_err!("voxel spacing must be positive, got {spacing:?}"));
        }
        if tag == DomainTag::CtNorm {
            if let Some(bad) = data
                .iter()
                .find(|&&x| !(-CT_NORM_SLACK..=1.0 + CT_NORM_SLACK).contains(&x))
            {
                return Err(arg_err!("CT_NORM sample {bad} lies outside [0, 1]"));
            }
        }
        Ok(Self {
            dims,
            spacing,
            data,
            tag,
        })
    }

    pub fn filled(dims: [usize; 3], value: f32, tag: DomainTag) -> Result<Self> {
        Self::new(dims, [1.0; 3], alloc::vec![value; dims.iter().product()], tag)
    }

    pub fn from_fn(
        dims: [usize; 3],
        tag: DomainTag,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for z in 0..dims[0] {
            for y in 0..dims[1] {
                for x in 0..dims[2] {
                    data.push(f(z, y, x));
                }
            }
        }
        Self::new(dims, [1.0; 3], data, tag)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.spacing
    }

    pub fn tag(&self) -> DomainTag {
        self.tag
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[2] + x
    }

    #[inline]
    pub fn at(&self, z: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(z, y, x)]
    }

    /// Same geometry, new samples and tag.
    pub fn with_data(&self, data: Vec<f32>, tag: DomainTag) -> Result<Self> {
        Self::new(self.dims, self.spacing, data, tag)
    }

    pub fn with_spacing(mut self, spacing: [f32; 3]) -> Result<Self> {
        if spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(arg_err!("voxel spacing must be positive, got {spacing:?}"));
        }
        self.spacing = spacing;
        Ok(self)
    }

    pub fn retag(self, tag: DomainTag) -> Result<Self> {
        Self::new(self.dims, self.spacing, self.data, tag)
    }

    pub fn expect_tag(&self, tag: DomainTag) -> Result<()> {
        if self.tag != tag {
            return Err(Error::Domain {
                expected: tag.name(),
                found: self.tag.name(),
            });
        }
        Ok(())
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }

    /// `[1, D, H, W]` tensor view of the samples.
    pub fn to_tensor(&self) -> Tensor<f32> {
        let [d, h, w] = self.dims;
        Tensor::new(&[1, d, h, w], self.data.clone()).expect("consistent volume")
    }

    /// Sub-volume starting at `origin` with extents `size`.
    pub fn crop(&self, origin: [usize; 3], size: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if origin[a] + size[a] > self.dims[a] || size[a] == 0 {
                return Err(arg_err!(
                    "crop {size:?} at {origin:?} does not fit in {:?}",
                    self.dims
                ));
            }
        }
        let mut data = Vec::with_capacity(size.iter().product());
        for z in 0..size[0] {
            for y in 0..size[1] {
                let s = self.index(origin[0] + z, origin[1] + y, origin[2]);
                data.extend_from_slice(&self.data[s..s + size[2]]);
            }
        }
        Self::new(size, self.spacing, data, self.tag)
    }

    pub fn same_geometry(&self, other: &Volume) -> Result<()> {
        if self.dims != other.dims {
            return Err(shape_err!("volume dims {:?} and {:?} differ", self.dims, other.dims));
        }
        Ok(())
    }
}

/// Hounsfield window mapped onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuRange {
    pub min_hu: f64,
    pub max_hu: f64,
}

impl Default for HuRange {
    fn default() -> Self {
        Self {
            min_hu: -1024.0,
            max_hu: 2252.7,
        }
    }
}

impl HuRange {
    pub fn new(min_hu: f64, max_hu: f64) -> Result<Self> {
        if !(min_hu < max_hu) {
            return Err(arg_err!("HU range needs min < max, got [{min_hu}, {max_hu}]"));
        }
        Ok(Self { min_hu, max_hu })
    }

    pub fn width(&self) -> f64 {
        self.max_hu - self.min_hu
    }

    /// `(x - min) / (max - min)`, clamped into `[0, 1]`.
    pub fn normalize(&self, hu: f64) -> f64 {
        ((hu - self.min_hu) / self.width()).clamp(0.0, 1.0)
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * self.width() + self.min_hu
    }
}

/// Normalized CT together with the number of samples clamped into range.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCt {
    pub volume: Volume,
    pub clamped: usize,
}

/// Zero-mean, unit (population) variance MR intensities.
pub fn normalize_mr(v: &Volume) -> Result<Volume> {
    v.expect_tag(DomainTag::MrRaw)?;
    let n = v.len() as f64;
    let mean = v.data.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = v.data.iter().map(|&x| (x as f64 - mean) * (x as f64 - mean)).sum::<f64>() / n;
    let std = num_traits::Float::sqrt(var);
    if !(std >= 1e-6) {
        return Err(Error::Degenerate(alloc::format!(
            "MR volume standard deviation {std:e} is below 1e-6"
        )));
    }
    let data = v.data.iter().map(|&x| ((x as f64 - mean) / std) as f32).collect();
    v.with_data(data, DomainTag::MrNorm)
}

/// Affine map of HU onto `[0, 1]`; out-of-range samples are clamped and
/// counted.
pub fn normalize_ct(v: &Volume, range: &HuRange) -> Result<NormalizedCt> {
    v.expect_tag(DomainTag::CtHu)?;
    let mut clamped = 0;
    let data = v
        .data
        .iter()
        .map(|&x| {
            let x = x as f64;
            if x < range.min_hu || x > range.max_hu {
                clamped += 1;
            }
            range.normalize(x) as f32
        })
        .collect();
    Ok(NormalizedCt {
        volume: v.with_data(data, DomainTag::CtNorm)?,
        clamped,
    })
}

/// Inverse of [`normalize_ct`] on in-range data.
pub fn denormalize_ct(v: &Volume, range: &HuRange) -> Result<Volume> {
    v.expect_tag(DomainTag::CtNorm)?;
    let data = v.data.iter().map(|&x| range.denormalize(x as f64) as f32).collect();
    v.with_data(data, DomainTag::CtHu)
}
