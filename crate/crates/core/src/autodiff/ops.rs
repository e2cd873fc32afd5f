use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::kernels::{correlate, correlate_input_grad, correlate_weight_grad, BoxGeometry};
use super::{Axis, Op, RaganRole, Tape, Var};
use crate::error::{arg_err, shape_err, Error, Result};
use crate::scalar::Scalar;

/// Logs inside the relativistic losses are clamped at `ln(1e-12)`.
pub const LOG_CLAMP: f64 = 1e-12;

fn dims4(shape: &[usize], what: &str) -> Result<[usize; 4]> {
    match shape {
        &[c, d, h, w] => Ok([c, d, h, w]),
        _ => Err(shape_err!("{what}: expected [C, D, H, W], got {shape:?}")),
    }
}

impl<T: Scalar> Tape<T> {
    /// Same-padded, stride-1 3D convolution (cross-correlation).
    /// `kernel` is `[Cout, Cin, k, k, k]` with odd `k`; `bias` is `[Cout]`.
    pub fn conv3d(&mut self, input: Var, kernel: Var, bias: Option<Var>) -> Result<Var> {
        let ks = self.shape(kernel).to_vec();
        let &[_, _, kd, kh, kw] = &ks[..] else {
            return Err(shape_err!("conv3d: kernel must be [Cout, Cin, k, k, k], got {ks:?}"));
        };
        if kd != kh || kh != kw {
            return Err(shape_err!("conv3d: kernel must be cubic, got {ks:?}"));
        }
        if kd % 2 == 0 {
            return Err(Error::Unsupported(alloc::format!(
                "conv3d: even kernel size {kd} cannot be same-padded"
            )));
        }
        self.conv_box(input, kernel, bias, [kd, kh, kw], "conv3d")
    }

    /// Same-padded 1D convolution along one spatial axis.
    /// `kernel` is `[Cout, Cin, k]` with odd `k`.
    pub fn conv1d_axis(&mut self, input: Var, kernel: Var, axis: Axis, bias: Option<Var>) -> Result<Var> {
        let ks = self.shape(kernel).to_vec();
        let &[_, _, k] = &ks[..] else {
            return Err(shape_err!("conv1d_axis: kernel must be [Cout, Cin, k], got {ks:?}"));
        };
        if k % 2 == 0 {
            return Err(Error::Unsupported(alloc::format!(
                "conv1d_axis: even kernel size {k} cannot be same-padded"
            )));
        }
        self.conv_box(input, kernel, bias, axis.extents(k), "conv1d_axis")
    }

    /// [`Tape::conv1d_axis`] with the axis given as an index (0 = depth,
    /// 1 = height, 2 = width).
    pub fn conv1d_axis_index(&mut self, input: Var, kernel: Var, axis: usize, bias: Option<Var>) -> Result<Var> {
        self.conv1d_axis(input, kernel, Axis::from_index(axis)?, bias)
    }

    fn conv_box(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        extents: [usize; 3],
        what: &str,
    ) -> Result<Var> {
        let [cin, d, h, w] = dims4(self.shape(input), what)?;
        let ks = self.shape(kernel);
        let (cout, kcin) = (ks[0], ks[1]);
        if kcin != cin {
            return Err(shape_err!(
                "{what}: input has {cin} channels but kernel expects {kcin}"
            ));
        }
        if let Some(b) = bias {
            if self.shape(b) != [cout] {
                return Err(shape_err!(
                    "{what}: bias shape {:?} does not match {cout} output channels",
                    self.shape(b)
                ));
            }
        }
        let geom = BoxGeometry::new([d, h, w], extents);
        let out = correlate(
            self.value(input),
            cin,
            self.value(kernel),
            cout,
            bias.map(|b| self.value(b)),
            geom,
        );
        Ok(self.push(
            vec![cout, d, h, w],
            out,
            Op::Conv {
                input,
                kernel,
                bias,
                extents,
            },
        ))
    }

    /// Softmax across the channel axis at every voxel.
    pub fn softmax_channels(&mut self, input: Var) -> Result<Var> {
        let [c, d, h, w] = dims4(self.shape(input), "softmax_channels")?;
        if c < 2 {
            return Err(shape_err!("softmax_channels: needs at least 2 channels, got {c}"));
        }
        let n = d * h * w;
        let x = self.value(input);
        let mut out = vec![T::zero(); x.len()];
        for p in 0..n {
            let mut m = x[p];
            for ch in 1..c {
                m = m.max(x[ch * n + p]);
            }
            let mut s = T::zero();
            for ch in 0..c {
                let e = (x[ch * n + p] - m).exp();
                out[ch * n + p] = e;
                s += e;
            }
            for ch in 0..c {
                out[ch * n + p] /= s;
            }
        }
        Ok(self.push(vec![c, d, h, w], out, Op::Softmax(input)))
    }

    /// Multiplies every channel of `features` by channel `channel` of `probs`.
    pub fn gate(&mut self, probs: Var, channel: usize, features: Var) -> Result<Var> {
        let [pc, pd, ph, pw] = dims4(self.shape(probs), "gate")?;
        let [c, d, h, w] = dims4(self.shape(features), "gate")?;
        if [pd, ph, pw] != [d, h, w] {
            return Err(shape_err!("gate: spatial shapes {:?} and {:?} differ", [pd, ph, pw], [d, h, w]));
        }
        if channel >= pc {
            return Err(arg_err!("gate: channel {channel} out of range for {pc} maps"));
        }
        let n = d * h * w;
        let p = &self.value(probs)[channel * n..(channel + 1) * n];
        let f = self.value(features);
        let mut out = vec![T::zero(); f.len()];
        for ch in 0..c {
            for i in 0..n {
                out[ch * n + i] = p[i] * f[ch * n + i];
            }
        }
        Ok(self.push(
            vec![c, d, h, w],
            out,
            Op::Gate {
                probs,
                channel,
                features,
            },
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let out = self
            .value(input)
            .iter()
            .map(|&x| if x > T::zero() { x } else { T::zero() })
            .collect();
        let shape = self.shape(input).to_vec();
        self.push(shape, out, Op::Relu(input))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape(a, b, "add")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape(a, b, "sub")?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x - y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, out, Op::Sub(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let out = self.value(a).iter().map(|&x| x * factor).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, out, Op::Scale(a, factor))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        self.push(vec![1], vec![s], Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s: T = v.iter().copied().sum::<T>() / T::from_usize(v.len());
        self.push(vec![1], vec![s], Op::Mean(a))
    }

    /// Mean absolute difference over all elements.
    pub fn l1_mean(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape(a, b, "l1_mean")?;
        let (x, y) = (self.value(a), self.value(b));
        let s: T = x.iter().zip(y).map(|(&p, &q)| (p - q).abs()).sum();
        let m = s / T::from_usize(x.len());
        Ok(self.push(vec![1], vec![m], Op::L1Mean(a, b)))
    }

    /// 2x2x2 average pooling with stride 2.
    pub fn avg_pool2(&mut self, input: Var) -> Result<Var> {
        let [c, d, h, w] = dims4(self.shape(input), "avg_pool2")?;
        for (name, n) in [("depth", d), ("height", h), ("width", w)] {
            if n % 2 != 0 {
                return Err(shape_err!("avg_pool2: {name} extent {n} is not divisible by 2"));
            }
        }
        let (od, oh, ow) = (d / 2, h / 2, w / 2);
        let x = self.value(input);
        let eighth = T::from_f64(0.125);
        let mut out = vec![T::zero(); c * od * oh * ow];
        for ch in 0..c {
            for z in 0..od {
                for y in 0..oh {
                    for xo in 0..ow {
                        let mut s = T::zero();
                        for a in 0..2 {
                            for b in 0..2 {
                                for e in 0..2 {
                                    s += x[((ch * d + 2 * z + a) * h + 2 * y + b) * w + 2 * xo + e];
                                }
                            }
                        }
                        out[((ch * od + z) * oh + y) * ow + xo] = s * eighth;
                    }
                }
            }
        }
        Ok(self.push(vec![c, od, oh, ow], out, Op::AvgPool2(input)))
    }

    /// Nearest-neighbour 2x upsampling on every spatial axis.
    pub fn upsample2(&mut self, input: Var) -> Result<Var> {
        let [c, d, h, w] = dims4(self.shape(input), "upsample2")?;
        let (od, oh, ow) = (2 * d, 2 * h, 2 * w);
        let x = self.value(input);
        let mut out = vec![T::zero(); c * od * oh * ow];
        for ch in 0..c {
            for z in 0..od {
                for y in 0..oh {
                    let src = ((ch * d + z / 2) * h + y / 2) * w;
                    let dst = ((ch * od + z) * oh + y) * ow;
                    for xo in 0..ow {
                        out[dst + xo] = x[src + xo / 2];
                    }
                }
            }
        }
        Ok(self.push(vec![c, od, oh, ow], out, Op::Upsample2(input)))
    }

    /// Channel concatenation `[a; b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let [ca, d, h, w] = dims4(self.shape(a), "concat")?;
        let [cb, d2, h2, w2] = dims4(self.shape(b), "concat")?;
        if [d, h, w] != [d2, h2, w2] {
            return Err(shape_err!("concat: spatial shapes {:?} and {:?} differ", [d, h, w], [d2, h2, w2]));
        }
        let mut out = Vec::with_capacity((ca + cb) * d * h * w);
        out.extend_from_slice(self.value(a));
        out.extend_from_slice(self.value(b));
        Ok(self.push(vec![ca + cb, d, h, w], out, Op::Concat(a, b)))
    }

    /// Spatial mean per channel, giving `[C, 1, 1, 1]`.
    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let [c, d, h, w] = dims4(self.shape(input), "global_avg_pool")?;
        let n = d * h * w;
        let x = self.value(input);
        let inv = T::one() / T::from_usize(n);
        let out = (0..c)
            .map(|ch| x[ch * n..(ch + 1) * n].iter().copied().sum::<T>() * inv)
            .collect();
        Ok(self.push(vec![c, 1, 1, 1], out, Op::GlobalAvgPool(input)))
    }

    /// Relativistic-average adversarial loss over scalar scores.
    ///
    /// With `P` the scores pushed "up" and `Q` the scores compared against
    /// (`P = real, Q = fake` for the discriminator, swapped for the
    /// generator), the loss is
    /// `-mean_i log s(P_i - mean Q) - mean_j log s(mean P - Q_j)`, where `s`
    /// is the logistic function and each log is clamped at `ln(1e-12)`.
    pub fn ragan_loss(&mut self, real: &[Var], fake: &[Var], role: RaganRole) -> Result<Var> {
        if real.is_empty() || fake.is_empty() {
            return Err(arg_err!(
                "relativistic loss needs non-empty score lists (real {}, fake {})",
                real.len(),
                fake.len()
            ));
        }
        for &v in real.iter().chain(fake) {
            if self.value(v).len() != 1 {
                return Err(shape_err!("relativistic loss: score has shape {:?}", self.shape(v)));
            }
        }
        let r: Vec<f64> = real.iter().map(|&v| self.scalar(v).to_f64()).collect();
        let f: Vec<f64> = fake.iter().map(|&v| self.scalar(v).to_f64()).collect();
        let (p, q) = match role {
            RaganRole::Discriminator => (&r, &f),
            RaganRole::Generator => (&f, &r),
        };
        let loss = ragan_value(p, q);
        Ok(self.push(
            vec![1],
            vec![T::from_f64(loss)],
            Op::Ragan {
                real: real.to_vec(),
                fake: fake.to_vec(),
                role,
            },
        ))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `ln s(x)` computed without overflow, clamped at `ln(1e-12)`.
pub fn clamped_log_sigmoid(x: f64) -> f64 {
    let ls = -(Float::max(-x, 0.0) + Float::ln_1p(Float::exp(-Float::abs(x))));
    Float::max(ls, Float::ln(LOG_CLAMP))
}

/// Derivative of [`clamped_log_sigmoid`]; zero where the clamp is active.
fn clamped_log_sigmoid_grad(x: f64) -> f64 {
    let ls = -(Float::max(-x, 0.0) + Float::ln_1p(Float::exp(-Float::abs(x))));
    if ls < Float::ln(LOG_CLAMP) {
        0.0
    } else {
        // 1 - s(x) = s(-x)
        1.0 / (1.0 + Float::exp(x))
    }
}

fn ragan_value(p: &[f64], q: &[f64]) -> f64 {
    let (mp, mq) = (mean(p), mean(q));
    let a = p.iter().map(|&x| clamped_log_sigmoid(x - mq)).sum::<f64>() / p.len() as f64;
    let b = q.iter().map(|&x| clamped_log_sigmoid(mp - x)).sum::<f64>() / q.len() as f64;
    -a - b
}

/// Gradients of [`ragan_value`] with respect to `p` and `q`.
fn ragan_grad(p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (np, nq) = (p.len() as f64, q.len() as f64);
    let (mp, mq) = (mean(p), mean(q));
    let la: Vec<f64> = p.iter().map(|&x| clamped_log_sigmoid_grad(x - mq)).collect();
    let lb: Vec<f64> = q.iter().map(|&x| clamped_log_sigmoid_grad(mp - x)).collect();
    let (sa, sb) = (la.iter().sum::<f64>(), lb.iter().sum::<f64>());
    let gp = la.iter().map(|&l| -l / np - sb / (nq * np)).collect();
    let gq = lb.iter().map(|&l| sa / (np * nq) + l / nq).collect();
    (gp, gq)
}

/// Vector-Jacobian product of node `v` given its output gradient `g`.
pub(super) fn vjp<T: Scalar>(tape: &Tape<T>, v: Var, g: &[T]) -> Vec<(Var, Vec<T>)> {
    let node = tape.node(v);
    let want = |x: Var| tape.requires_grad(x);
    match &node.op {
        Op::Leaf => vec![],
        Op::Conv {
            input,
            kernel,
            bias,
            extents,
        } => {
            let ishape = tape.shape(*input);
            let (cin, dims) = (ishape[0], [ishape[1], ishape[2], ishape[3]]);
            let cout = node.shape[0];
            let geom = BoxGeometry::new(dims, *extents);
            let mut out = Vec::new();
            if want(*input) {
                out.push((
                    *input,
                    correlate_input_grad(g, cout, tape.value(*kernel), cin, geom),
                ));
            }
            if want(*kernel) {
                out.push((
                    *kernel,
                    correlate_weight_grad(tape.value(*input), cin, g, cout, geom),
                ));
            }
            if let Some(b) = bias {
                if want(*b) {
                    let n = geom.voxels();
                    let gb = (0..cout).map(|c| g[c * n..(c + 1) * n].iter().copied().sum()).collect();
                    out.push((*b, gb));
                }
            }
            out
        }
        Op::Softmax(a) => {
            let c = node.shape[0];
            let n = node.data.len() / c;
            let y = &node.data;
            let mut gx = vec![T::zero(); y.len()];
            for p in 0..n {
                let mut dotp = T::zero();
                for ch in 0..c {
                    dotp += g[ch * n + p] * y[ch * n + p];
                }
                for ch in 0..c {
                    gx[ch * n + p] = y[ch * n + p] * (g[ch * n + p] - dotp);
                }
            }
            vec![(*a, gx)]
        }
        Op::Gate {
            probs,
            channel,
            features,
        } => {
            let c = node.shape[0];
            let n = node.data.len() / c;
            let pv = tape.value(*probs);
            let pr = &pv[channel * n..(channel + 1) * n];
            let f = tape.value(*features);
            let mut out = Vec::new();
            if want(*features) {
                let mut gf = vec![T::zero(); f.len()];
                for ch in 0..c {
                    for i in 0..n {
                        gf[ch * n + i] = g[ch * n + i] * pr[i];
                    }
                }
                out.push((*features, gf));
            }
            if want(*probs) {
                let mut gp = vec![T::zero(); pv.len()];
                for ch in 0..c {
                    for i in 0..n {
                        gp[channel * n + i] += g[ch * n + i] * f[ch * n + i];
                    }
                }
                out.push((*probs, gp));
            }
            out
        }
        Op::Relu(a) => {
            let x = tape.value(*a);
            let gx = x
                .iter()
                .zip(g)
                .map(|(&xi, &gi)| if xi > T::zero() { gi } else { T::zero() })
                .collect();
            vec![(*a, gx)]
        }
        Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
        Op::Sub(a, b) => vec![(*a, g.to_vec()), (*b, g.iter().map(|&x| -x).collect())],
        Op::Scale(a, f) => vec![(*a, g.iter().map(|&x| x * *f).collect())],
        Op::Sum(a) => vec![(*a, vec![g[0]; tape.value(*a).len()])],
        Op::Mean(a) => {
            let n = tape.value(*a).len();
            vec![(*a, vec![g[0] / T::from_usize(n); n])]
        }
        Op::L1Mean(a, b) => {
            let (x, y) = (tape.value(*a), tape.value(*b));
            let scale = g[0] / T::from_usize(x.len());
            let ga: Vec<T> = x
                .iter()
                .zip(y)
                .map(|(&p, &q)| {
                    let d = p - q;
                    if d > T::zero() {
                        scale
                    } else if d < T::zero() {
                        -scale
                    } else {
                        T::zero()
                    }
                })
                .collect();
            let gb = ga.iter().map(|&x| -x).collect();
            vec![(*a, ga), (*b, gb)]
        }
        Op::AvgPool2(a) => {
            let s = tape.shape(*a);
            let [c, d, h, w] = [s[0], s[1], s[2], s[3]];
            let (od, oh, ow) = (d / 2, h / 2, w / 2);
            let eighth = T::from_f64(0.125);
            let mut gx = vec![T::zero(); c * d * h * w];
            for ch in 0..c {
                for z in 0..d {
                    for y in 0..h {
                        for x in 0..w {
                            gx[((ch * d + z) * h + y) * w + x] =
                                g[((ch * od + z / 2) * oh + y / 2) * ow + x / 2] * eighth;
                        }
                    }
                }
            }
            vec![(*a, gx)]
        }
        Op::Upsample2(a) => {
            let s = tape.shape(*a);
            let [c, d, h, w] = [s[0], s[1], s[2], s[3]];
            let (od, oh, ow) = (2 * d, 2 * h, 2 * w);
            let mut gx = vec![T::zero(); c * d * h * w];
            for ch in 0..c {
                for z in 0..od {
                    for y in 0..oh {
                        for x in 0..ow {
                            gx[((ch * d + z / 2) * h + y / 2) * w + x / 2] += g[((ch * od + z) * oh + y) * ow + x];
                        }
                    }
                }
            }
            vec![(*a, gx)]
        }
        Op::Concat(a, b) => {
            let na = tape.value(*a).len();
            vec![(*a, g[..na].to_vec()), (*b, g[na..].to_vec())]
        }
        Op::GlobalAvgPool(a) => {
            let s = tape.shape(*a);
            let c = s[0];
            let n = s[1] * s[2] * s[3];
            let inv = T::one() / T::from_usize(n);
            let mut gx = vec![T::zero(); c * n];
            for ch in 0..c {
                let gv = g[ch] * inv;
                gx[ch * n..(ch + 1) * n].iter_mut().for_each(|x| *x = gv);
            }
            vec![(*a, gx)]
        }
        Op::Ragan { real, fake, role } => {
            let r: Vec<f64> = real.iter().map(|&x| tape.scalar(x).to_f64()).collect();
            let f: Vec<f64> = fake.iter().map(|&x| tape.scalar(x).to_f64()).collect();
            let upstream = g[0].to_f64();
            let (gr, gf) = match role {
                RaganRole::Discriminator => ragan_grad(&r, &f),
                RaganRole::Generator => {
                    let (gp, gq) = ragan_grad(&f, &r);
                    (gq, gp)
                }
            };
            real.iter()
                .zip(gr)
                .chain(fake.iter().zip(gf))
                .map(|(&x, gx)| (x, vec![T::from_f64(gx * upstream)]))
                .collect()
        }
    }
}
