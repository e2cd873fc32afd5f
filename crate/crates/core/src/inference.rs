//! Whole-volume prediction by sliding windows with uniform overlap averaging.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{arg_err, shape_err, Result};
use crate::network::SynthesisModel;
use crate::tensor::Tensor;
use crate::volume::{DomainTag, Volume};

/// Window layout over one volume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StitchPlan {
    dims: [usize; 3],
    window: [usize; 3],
    stride: [usize; 3],
    axis_origins: [Vec<usize>; 3],
}

/// Origins along one axis: multiples of `stride` that fit, then one flush
/// with the far boundary.
pub fn axis_origins(dim: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if window == 0 || window > dim {
        return Err(arg_err!("window {window} does not fit in extent {dim}"));
    }
    if stride == 0 || stride > window {
        return Err(arg_err!("stride {stride} must lie in [1, {window}]"));
    }
    let mut out = Vec::new();
    let mut o = 0;
    loop {
        let clamped = o.min(dim - window);
        if out.last() != Some(&clamped) {
            out.push(clamped);
        }
        if o + window >= dim {
            break;
        }
        o += stride;
    }
    Ok(out)
}

pub fn plan_windows(dims: [usize; 3], window: [usize; 3], stride: [usize; 3]) -> Result<StitchPlan> {
    let axis_origins = [
        axis_origins(dims[0], window[0], stride[0])?,
        axis_origins(dims[1], window[1], stride[1])?,
        axis_origins(dims[2], window[2], stride[2])?,
    ];
    Ok(StitchPlan {
        dims,
        window,
        stride,
        axis_origins,
    })
}

/// Half-window stride on every axis.
pub fn default_stride(window: [usize; 3]) -> [usize; 3] {
    window.map(|w| (w / 2).max(1))
}

impl StitchPlan {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn window(&self) -> [usize; 3] {
        self.window
    }

    pub fn stride(&self) -> [usize; 3] {
        self.stride
    }

    pub fn axis_origins(&self, axis: usize) -> &[usize] {
        &self.axis_origins[axis]
    }

    /// All window origins, depth-major.
    pub fn origins(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for &z in &self.axis_origins[0] {
            for &y in &self.axis_origins[1] {
                for &x in &self.axis_origins[2] {
                    out.push([z, y, x]);
                }
            }
        }
        out
    }

    /// Number of windows covering each voxel.
    pub fn coverage(&self) -> Vec<u32> {
        let [d, h, w] = self.dims;
        let mut n = vec![0u32; d * h * w];
        for o in self.origins() {
            for_each_window_voxel(self.dims, o, self.window, |g, _| n[g] += 1);
        }
        n
    }

    /// Per-voxel sum of the normalized window weights. Each covering window
    /// carries weight `1/n`, applied as one division of the accumulated sum,
    /// so the weights are summed as the rational `k/n` before rounding.
    pub fn weight_sums(&self) -> Vec<f64> {
        let cov = self.coverage();
        let mut k = vec![0u32; cov.len()];
        for o in self.origins() {
            for_each_window_voxel(self.dims, o, self.window, |g, _| k[g] += 1);
        }
        k.iter().zip(&cov).map(|(&k, &n)| k as f64 / n as f64).collect()
    }
}

fn for_each_window_voxel(dims: [usize; 3], origin: [usize; 3], window: [usize; 3], mut f: impl FnMut(usize, usize)) {
    let [_, h, w] = dims;
    let mut local = 0;
    for z in 0..window[0] {
        for y in 0..window[1] {
            let row = ((origin[0] + z) * h + origin[1] + y) * w + origin[2];
            for x in 0..window[2] {
                f(row + x, local);
                local += 1;
            }
        }
    }
}

/// Per-window model outputs, each `[1, d, h, w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPrediction {
    pub combined: Tensor<f32>,
    pub low: Option<Tensor<f32>>,
    pub high: Option<Tensor<f32>>,
}

/// Anything that maps an MR window to a CT window.
pub trait VolumePredictor {
    fn predict_window(&self, mr: &Tensor<f32>) -> Result<WindowPrediction>;
}

impl VolumePredictor for SynthesisModel<f32> {
    fn predict_window(&self, mr: &Tensor<f32>) -> Result<WindowPrediction> {
        let p = self.predict(mr)?;
        Ok(WindowPrediction {
            combined: p.combined,
            low: p.low,
            high: p.high,
        })
    }
}

/// Adapts a closure producing only the combined output.
pub struct FnPredictor<F>(pub F);

impl<F: Fn(&Tensor<f32>) -> Result<Tensor<f32>>> VolumePredictor for FnPredictor<F> {
    fn predict_window(&self, mr: &Tensor<f32>) -> Result<WindowPrediction> {
        Ok(WindowPrediction {
            combined: (self.0)(mr)?,
            low: None,
            high: None,
        })
    }
}

/// Unclamped stitched outputs in plain arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchedArrays {
    pub combined: Vec<f32>,
    pub low: Option<Vec<f32>>,
    pub high: Option<Vec<f32>>,
}

struct Accumulator {
    sum: Vec<f64>,
}

impl Accumulator {
    fn add(&mut self, dims: [usize; 3], origin: [usize; 3], window: [usize; 3], t: &Tensor<f32>) -> Result<()> {
        let expect = [1, window[0], window[1], window[2]];
        if t.shape() != expect {
            return Err(shape_err!("window prediction has shape {:?}, expected {:?}", t.shape(), expect));
        }
        let data = t.data();
        for_each_window_voxel(dims, origin, window, |g, l| self.sum[g] += data[l] as f64);
        Ok(())
    }

    fn finish(self, cov: &[u32]) -> Vec<f32> {
        self.sum.iter().zip(cov).map(|(s, &n)| (s / n as f64) as f32).collect()
    }
}

/// Runs `model` over every window of `plan` and averages overlapping outputs.
pub fn stitch<M: VolumePredictor + ?Sized>(model: &M, mr: &Volume, plan: &StitchPlan) -> Result<StitchedArrays> {
    if mr.dims() != plan.dims {
        return Err(shape_err!("volume dims {:?} do not match plan dims {:?}", mr.dims(), plan.dims));
    }
    let n = mr.len();
    let new_acc = || Accumulator { sum: vec![0.0; n] };
    let mut combined = new_acc();
    let mut low: Option<Accumulator> = None;
    let mut high: Option<Accumulator> = None;
    for (i, origin) in plan.origins().into_iter().enumerate() {
        let input = mr.crop(origin, plan.window)?.to_tensor();
        let p = model.predict_window(&input)?;
        combined.add(plan.dims, origin, plan.window, &p.combined)?;
        for (band, acc) in [(&p.low, &mut low), (&p.high, &mut high)] {
            match (band, acc.as_mut()) {
                (Some(t), Some(a)) => a.add(plan.dims, origin, plan.window, t)?,
                (Some(t), None) if i == 0 => {
                    let mut a = new_acc();
                    a.add(plan.dims, origin, plan.window, t)?;
                    *acc = Some(a);
                }
                (None, None) => {}
                _ => return Err(shape_err!("predictor emitted bands for some windows only")),
            }
        }
    }
    let cov = plan.coverage();
    Ok(StitchedArrays {
        combined: combined.finish(&cov),
        low: low.map(|a| a.finish(&cov)),
        high: high.map(|a| a.finish(&cov)),
    })
}

/// Stitched synthetic CT plus optional band volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchedVolume {
    pub ct: Volume,
    pub low: Option<Volume>,
    pub high: Option<Volume>,
    /// Voxels of the combined output clamped into `[0, 1]`.
    pub clamped: usize,
}

/// Whole-volume synthesis from a normalized MR volume.
pub fn predict_volume<M: VolumePredictor + ?Sized>(model: &M, mr: &Volume, plan: &StitchPlan) -> Result<StitchedVolume> {
    mr.expect_tag(DomainTag::MrNorm)?;
    let s = stitch(model, mr, plan)?;
    let mut clamped = 0;
    let ct: Vec<f32> = s
        .combined
        .into_iter()
        .map(|v| {
            let c = v.clamp(0.0, 1.0);
            if c != v {
                clamped += 1;
            }
            c
        })
        .collect();
    Ok(StitchedVolume {
        ct: mr.with_data(ct, DomainTag::CtNorm)?,
        low: s.low.map(|d| mr.with_data(d, DomainTag::CtLowFreq)).transpose()?,
        high: s.high.map(|d| mr.with_data(d, DomainTag::CtHighFreq)).transpose()?,
        clamped,
    })
}
