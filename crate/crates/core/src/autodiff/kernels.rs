//! Zero-padded, stride-1 box correlation over `[C, D, H, W]` volumes.
//!
//! Every convolution in the engine (dense 3D kernels and single-axis 1D
//! kernels alike) is a correlation with a box of odd extents `(kd, kh, kw)`.
//! The input is copied into a zero-padded buffer once, and each kernel tap
//! then becomes one long contiguous multiply-add over the padded layout.
//! Positions that land in the padding band are computed and discarded.

use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct BoxGeometry {
    pub dims: [usize; 3],
    pub extents: [usize; 3],
}

impl BoxGeometry {
    pub fn new(dims: [usize; 3], extents: [usize; 3]) -> Self {
        debug_assert!(extents.iter().all(|k| k % 2 == 1));
        Self { dims, extents }
    }

    #[inline]
    fn radius(&self) -> [usize; 3] {
        [
            self.extents[0] / 2,
            self.extents[1] / 2,
            self.extents[2] / 2,
        ]
    }

    #[inline]
    fn padded(&self) -> [usize; 3] {
        let r = self.radius();
        [
            self.dims[0] + 2 * r[0],
            self.dims[1] + 2 * r[1],
            self.dims[2] + 2 * r[2],
        ]
    }

    #[inline]
    pub fn voxels(&self) -> usize {
        self.dims.iter().product()
    }

    #[inline]
    pub fn taps(&self) -> usize {
        self.extents.iter().product()
    }

    #[inline]
    fn padded_len(&self) -> usize {
        self.padded().iter().product()
    }

    /// First padded index of a valid output voxel and the length of the
    /// contiguous run that covers all valid voxels.
    fn span(&self) -> (usize, usize) {
        let r = self.radius();
        let [_, hp, wp] = self.padded();
        let [d, h, w] = self.dims;
        let first = (r[0] * hp + r[1]) * wp + r[2];
        let last = ((d - 1 + r[0]) * hp + (h - 1 + r[1])) * wp + (w - 1 + r[2]);
        (first, last - first + 1)
    }

    /// Flat padded-layout offset of each tap, in row-major tap order.
    fn offsets(&self) -> Vec<isize> {
        let r = self.radius();
        let [_, hp, wp] = self.padded();
        let mut out = Vec::with_capacity(self.taps());
        for a in 0..self.extents[0] {
            for b in 0..self.extents[1] {
                for c in 0..self.extents[2] {
                    let dz = a as isize - r[0] as isize;
                    let dy = b as isize - r[1] as isize;
                    let dx = c as isize - r[2] as isize;
                    out.push((dz * hp as isize + dy) * wp as isize + dx);
                }
            }
        }
        out
    }

    /// Zero-padded copy of `channels` volumes.
    fn pad<T: Scalar>(&self, src: &[T], channels: usize) -> Vec<T> {
        let r = self.radius();
        let [_, hp, wp] = self.padded();
        let [d, h, w] = self.dims;
        let np = self.padded_len();
        let n = self.voxels();
        let mut out = vec![T::zero(); channels * np];
        for c in 0..channels {
            let s = &src[c * n..(c + 1) * n];
            let o = &mut out[c * np..(c + 1) * np];
            for z in 0..d {
                for y in 0..h {
                    let dst = ((z + r[0]) * hp + y + r[1]) * wp + r[2];
                    o[dst..dst + w].copy_from_slice(&s[(z * h + y) * w..(z * h + y + 1) * w]);
                }
            }
        }
        out
    }

    /// Copies the valid voxels of a span-relative accumulator into `dst`.
    fn crop<T: Scalar>(&self, acc: &[T], dst: &mut [T], bias: T) {
        let r = self.radius();
        let [_, hp, wp] = self.padded();
        let [d, h, w] = self.dims;
        let (first, _) = self.span();
        for z in 0..d {
            for y in 0..h {
                let src = ((z + r[0]) * hp + y + r[1]) * wp + r[2] - first;
                let row = &mut dst[(z * h + y) * w..(z * h + y + 1) * w];
                for (o, &a) in row.iter_mut().zip(&acc[src..src + w]) {
                    *o = a + bias;
                }
            }
        }
    }
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dot product with eight interleaved partial sums; the reduction order is
/// fixed so results are reproducible.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut lanes = [T::zero(); 8];
    let chunks = n / 8;
    for i in 0..chunks {
        let (ca, cb) = (&a[i * 8..i * 8 + 8], &b[i * 8..i * 8 + 8]);
        for l in 0..8 {
            lanes[l] += ca[l] * cb[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..n {
        tail += a[i] * b[i];
    }
    ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5]))
        + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7]))
        + tail
}

/// `out[co] = bias[co] + sum_ci sum_tap w[co, ci, tap] * in[ci, p + tap]`.
///
/// `weights` is laid out `[cout, cin, taps]`.
pub(crate) fn correlate<T: Scalar>(
    input: &[T],
    cin: usize,
    weights: &[T],
    cout: usize,
    bias: Option<&[T]>,
    geom: BoxGeometry,
) -> Vec<T> {
    let taps = geom.taps();
    let n = geom.voxels();
    let np = geom.padded_len();
    let padded = geom.pad(input, cin);
    let offsets = geom.offsets();
    let (first, len) = geom.span();
    let mut out = vec![T::zero(); cout * n];
    let mut acc = vec![T::zero(); len];
    for co in 0..cout {
        acc.iter_mut().for_each(|a| *a = T::zero());
        for ci in 0..cin {
            let chan = &padded[ci * np..(ci + 1) * np];
            let wrow = &weights[(co * cin + ci) * taps..(co * cin + ci + 1) * taps];
            for (&wv, &off) in wrow.iter().zip(&offsets) {
                if wv == T::zero() {
                    continue;
                }
                let start = (first as isize + off) as usize;
                axpy(wv, &chan[start..start + len], &mut acc);
            }
        }
        let b = bias.map_or(T::zero(), |b| b[co]);
        geom.crop(&acc, &mut out[co * n..(co + 1) * n], b);
    }
    out
}

/// Gradient of [`correlate`] with respect to its input: correlation of the
/// output gradient with the channel-transposed, spatially flipped kernel.
pub(crate) fn correlate_input_grad<T: Scalar>(
    grad_out: &[T],
    cout: usize,
    weights: &[T],
    cin: usize,
    geom: BoxGeometry,
) -> Vec<T> {
    let taps = geom.taps();
    let mut flipped = vec![T::zero(); weights.len()];
    for co in 0..cout {
        for ci in 0..cin {
            for t in 0..taps {
                flipped[(ci * cout + co) * taps + (taps - 1 - t)] = weights[(co * cin + ci) * taps + t];
            }
        }
    }
    correlate(grad_out, cout, &flipped, cin, None, geom)
}

/// Gradient of [`correlate`] with respect to its weights, laid out
/// `[cout, cin, taps]`.
pub(crate) fn correlate_weight_grad<T: Scalar>(
    input: &[T],
    cin: usize,
    grad_out: &[T],
    cout: usize,
    geom: BoxGeometry,
) -> Vec<T> {
    let taps = geom.taps();
    let np = geom.padded_len();
    let padded_in = geom.pad(input, cin);
    let padded_g = geom.pad(grad_out, cout);
    let offsets = geom.offsets();
    let (first, len) = geom.span();
    let mut gw = vec![T::zero(); cout * cin * taps];
    for co in 0..cout {
        let g = &padded_g[co * np + first..co * np + first + len];
        for ci in 0..cin {
            let chan = &padded_in[ci * np..(ci + 1) * np];
            for (t, &off) in offsets.iter().enumerate() {
                let start = (first as isize + off) as usize;
                gw[(co * cin + ci) * taps + t] = dot(g, &chan[start..start + len]);
            }
        }
    }
    gw
}
