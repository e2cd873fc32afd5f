//! The optimization loop: two-term L1 objective, z-rotation augmentation,
//! random cropping, Adam updates and optional high-frequency adversarial
//! steps.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::adversarial::{Discriminator, DiscriminatorConfig};
use crate::autodiff::{RaganRole, Tape, Var};
use crate::error::{arg_err, Error, Result};
use crate::frequency::{decompose, GaussianSpec};
use crate::network::{BaseKind, HeadKind, ModelConfig, SynthesisModel};
use crate::optim::{AdamConfig, AdamState};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::volume::{normalize_ct, normalize_mr, DomainTag, HuRange, Volume};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub crop: [usize; 3],
    /// Augmentation angles are drawn uniformly from `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    /// Gaussian sigma (voxels) of the supervision split.
    pub sigma: f64,
    pub seed: u64,
    pub adversarial: bool,
    pub adv_weight: f64,
    pub base_kind: BaseKind,
    pub channels: usize,
    pub refine_k: usize,
    /// Supervision variant; `OverallOnly` trains the plain base-network baseline.
    pub head: HeadKind,
    pub discriminator: DiscriminatorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            crop: [16; 3],
            rotation_deg: 10.0,
            sigma: 2.0,
            seed: 0,
            adversarial: false,
            adv_weight: 0.01,
            base_kind: BaseKind::UNet,
            channels: 32,
            refine_k: 13,
            head: HeadKind::FrequencySupervised,
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        let mut m = ModelConfig::new(self.base_kind, self.channels, self.refine_k);
        m.head = self.head;
        m
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }

    pub fn gaussian(&self) -> Result<GaussianSpec> {
        GaussianSpec::new(self.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=180.0).contains(&self.rotation_deg) {
            return Err(arg_err!(
                "rotation range +/-{} degrees is outside [-180, 180]",
                self.rotation_deg
            ));
        }
        if self.crop.contains(&0) {
            return Err(arg_err!("crop extents must be positive, got {:?}", self.crop));
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(arg_err!("invalid Adam hyperparameters"));
        }
        if self.adversarial && self.head == HeadKind::OverallOnly {
            return Err(Error::Unsupported(
                "adversarial training needs the high-frequency head".into(),
            ));
        }
        self.model_config().validate()?;
        GaussianSpec::new(self.sigma)?;
        Ok(())
    }
}

/// One training pair in network units, with its supervision split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    /// Zero-mean, unit-variance MR.
    pub mr: Volume,
    /// CT in `[0, 1]`.
    pub ct: Volume,
    /// High band of `ct`, computed on the whole volume.
    pub ct_high: Volume,
    /// CT samples clamped during normalization.
    pub clamped: usize,
}

/// Normalizes a raw MR/CT pair and splits the CT into frequency bands.
pub fn prepare_pair(mr_raw: &Volume, ct_hu: &Volume, range: &HuRange, spec: &GaussianSpec) -> Result<TrainPair> {
    mr_raw.same_geometry(ct_hu)?;
    let mr = normalize_mr(mr_raw)?;
    let ct = normalize_ct(ct_hu, range)?;
    let bands = decompose(&ct.volume, spec)?;
    Ok(TrainPair {
        mr,
        ct: ct.volume,
        ct_high: bands.high,
        clamped: ct.clamped,
    })
}

/// Supervised loss terms on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossTerms {
    pub total: Var,
    pub high: Var,
    pub overall: Var,
}

/// `mean|y_high_hat - y_high| + mean|(y_low_hat + y_high_hat) - y|`.
pub fn total_loss<T: Scalar>(
    tape: &mut Tape<T>,
    y_low_hat: Var,
    y_high_hat: Var,
    y: Var,
    y_high: Var,
) -> Result<LossTerms> {
    let high = tape.l1_mean(y_high_hat, y_high)?;
    let combined = tape.add(y_low_hat, y_high_hat)?;
    let overall = tape.l1_mean(combined, y)?;
    let total = tape.add(high, overall)?;
    Ok(LossTerms {
        total,
        high,
        overall,
    })
}

/// Rotates every axial (constant-depth) slice by `angle_deg` about the
/// slice centre with bilinear interpolation; samples from outside the
/// slice take the volume minimum.
pub fn rotate_z(v: &Volume, angle_deg: f64) -> Result<Volume> {
    if !(angle_deg.abs() <= 180.0) {
        return Err(arg_err!("rotation angle {angle_deg} is outside [-180, 180]"));
    }
    if angle_deg == 0.0 {
        return Ok(v.clone());
    }
    let [d, h, w] = v.dims();
    let fill = v.min_max().0;
    let theta = angle_deg.to_radians();
    let (sin, cos) = (Float::sin(theta), Float::cos(theta));
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    const EDGE: f64 = 1e-6;
    let mut out = vec![0.0f32; v.len()];
    for y in 0..h {
        for x in 0..w {
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            let outside = sx < -EDGE || sy < -EDGE || sx > (w - 1) as f64 + EDGE || sy > (h - 1) as f64 + EDGE;
            let sx = sx.clamp(0.0, (w - 1) as f64);
            let sy = sy.clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (Float::floor(sx) as usize, Float::floor(sy) as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for z in 0..d {
                let o = v.index(z, y, x);
                if outside {
                    out[o] = fill;
                    continue;
                }
                let a = v.at(z, y0, x0) as f64;
                let b = v.at(z, y0, x1) as f64;
                let c = v.at(z, y1, x0) as f64;
                let e = v.at(z, y1, x1) as f64;
                let top = a + (b - a) * fx;
                let bottom = c + (e - c) * fx;
                out[o] = (top + (bottom - top) * fy) as f32;
            }
        }
    }
    v.with_data(out, v.tag())
}

/// Co-located crops of one training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub origin: [usize; 3],
    pub mr_crop: Tensor<f32>,
    pub ct_crop: Tensor<f32>,
    pub ct_high_crop: Tensor<f32>,
}

/// Uniformly random crop origin for `size` inside `dims`.
pub fn random_origin(dims: [usize; 3], size: [usize; 3], rng: &mut SplitMix64) -> Result<[usize; 3]> {
    let mut o = [0; 3];
    for a in 0..3 {
        if size[a] == 0 || size[a] > dims[a] {
            return Err(arg_err!("crop {size:?} does not fit in volume {dims:?}"));
        }
        o[a] = rng.below((dims[a] - size[a] + 1) as u64) as usize;
    }
    Ok(o)
}

/// Crops MR, CT and CT high band at one random origin.
pub fn sample_crop(mr: &Volume, ct: &Volume, ct_high: &Volume, size: [usize; 3], rng: &mut SplitMix64) -> Result<TrainSample> {
    mr.same_geometry(ct)?;
    mr.same_geometry(ct_high)?;
    ct_high.expect_tag(DomainTag::CtHighFreq)?;
    let origin = random_origin(mr.dims(), size, rng)?;
    Ok(TrainSample {
        origin,
        mr_crop: mr.crop(origin, size)?.to_tensor(),
        ct_crop: ct.crop(origin, size)?.to_tensor(),
        ct_high_crop: ct_high.crop(origin, size)?.to_tensor(),
    })
}

/// Mean losses of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Generator objective including the weighted adversarial term.
    pub loss_total: f64,
    pub loss_high: f64,
    pub loss_overall: f64,
    /// Unweighted generator adversarial loss (0 when disabled).
    pub loss_adv: f64,
}

impl EpochRecord {
    /// `loss_high + loss_overall`.
    pub fn supervised(&self) -> f64 {
        self.loss_high + self.loss_overall
    }
}

/// Receives progress after every epoch.
pub trait TrainObserver {
    fn on_epoch(&mut self, record: &EpochRecord, model: &SynthesisModel<f32>);
}

impl TrainObserver for () {
    fn on_epoch(&mut self, _: &EpochRecord, _: &SynthesisModel<f32>) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub curve: Vec<EpochRecord>,
    pub discriminator: Option<Discriminator<f32>>,
}

struct StepLosses {
    total: f64,
    high: f64,
    overall: f64,
    adv: f64,
}

struct Adversary {
    disc: Discriminator<f32>,
    adam: AdamState<f32>,
}

/// Trains `model` in place on `dataset`, one random crop per pair per epoch.
pub fn train(
    model: &mut SynthesisModel<f32>,
    dataset: &[TrainPair],
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(arg_err!("training set is empty"));
    }
    if model.config().head != config.head {
        return Err(arg_err!("model head does not match the training configuration"));
    }
    for (i, p) in dataset.iter().enumerate() {
        p.mr.same_geometry(&p.ct)?;
        p.mr.same_geometry(&p.ct_high)?;
        let dims = p.mr.dims();
        if (0..3).any(|a| config.crop[a] > dims[a]) {
            return Err(arg_err!("pair {i}: crop {:?} exceeds volume {dims:?}", config.crop));
        }
    }
    model.config().base.check_input(config.crop)?;

    let master = SplitMix64::new(config.seed);
    let mut rng = master.split(1);
    let mut adam = AdamState::new(model.params().tensors(), config.adam());
    let mut adversary = if config.adversarial {
        let disc = Discriminator::new(config.discriminator, Some(master.split(2).next_u64()))?;
        let adam = AdamState::new(disc.params().tensors(), config.adam());
        Some(Adversary { disc, adam })
    } else {
        None
    };

    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut acc = [0.0f64; 4];
        for (i, pair) in dataset.iter().enumerate() {
            let angle = if config.rotation_deg > 0.0 {
                rng.uniform(-config.rotation_deg, config.rotation_deg)
            } else {
                0.0
            };
            let sample = if angle == 0.0 {
                sample_crop(&pair.mr, &pair.ct, &pair.ct_high, config.crop, &mut rng)?
            } else {
                let mr = rotate_z(&pair.mr, angle)?;
                let ct = rotate_z(&pair.ct, angle)?;
                let high = rotate_z(&pair.ct_high, angle)?;
                sample_crop(&mr, &ct, &high, config.crop, &mut rng)?
            };
            let l = train_step(model, &mut adam, adversary.as_mut(), &sample, config)?;
            if !l.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    pair: i,
                    total: l.total,
                    high: l.high,
                    overall: l.overall,
                    adv: l.adv,
                });
            }
            acc[0] += l.total;
            acc[1] += l.high;
            acc[2] += l.overall;
            acc[3] += l.adv;
        }
        let n = dataset.len() as f64;
        let record = EpochRecord {
            epoch,
            loss_total: acc[0] / n,
            loss_high: acc[1] / n,
            loss_overall: acc[2] / n,
            loss_adv: acc[3] / n,
        };
        observer.on_epoch(&record, model);
        curve.push(record);
    }
    Ok(TrainOutcome {
        curve,
        discriminator: adversary.map(|a| a.disc),
    })
}

fn train_step(
    model: &mut SynthesisModel<f32>,
    adam: &mut AdamState<f32>,
    adversary: Option<&mut Adversary>,
    sample: &TrainSample,
    config: &TrainConfig,
) -> Result<StepLosses> {
    let mut tape = Tape::new();
    let p = model.params().bind(&mut tape);
    let x = tape.constant(&sample.mr_crop);
    let y = tape.constant(&sample.ct_crop);
    let out = model.forward(&mut tape, &p, x)?;
    let (objective, high, overall) = match (out.low, out.high) {
        (Some(yl), Some(yh)) => {
            let target_high = tape.constant(&sample.ct_high_crop);
            let t = total_loss(&mut tape, yl, yh, y, target_high)?;
            (t.total, tape.scalar(t.high) as f64, tape.scalar(t.overall) as f64)
        }
        _ => {
            let overall = tape.l1_mean(out.combined, y)?;
            (overall, 0.0, tape.scalar(overall) as f64)
        }
    };
    let mut adv = 0.0;
    let mut objective = objective;
    if let (Some(a), Some(yh)) = (adversary, out.high) {
        // Discriminator step on real vs current fake high bands.
        let fake = tape.to_tensor(yh);
        let mut dt = Tape::new();
        let dp = a.disc.params().bind(&mut dt);
        let real_v = dt.constant(&sample.ct_high_crop);
        let fake_v = dt.constant(&fake);
        let sr = a.disc.forward(&mut dt, &dp, real_v)?;
        let sf = a.disc.forward(&mut dt, &dp, fake_v)?;
        let d_loss = dt.ragan_loss(&[sr], &[sf], RaganRole::Discriminator)?;
        dt.backward(d_loss)?;
        a.disc.params_mut().collect_grads(&dt, &dp)?;
        a.adam.step(a.disc.params_mut().tensors_mut())?;

        // Generator adversarial term against the updated critic.
        let fp = a.disc.params().bind_frozen(&mut tape);
        let real_v = tape.constant(&sample.ct_high_crop);
        let sr = a.disc.forward(&mut tape, &fp, real_v)?;
        let sf = a.disc.forward(&mut tape, &fp, yh)?;
        let g_loss = tape.ragan_loss(&[sr], &[sf], RaganRole::Generator)?;
        adv = tape.scalar(g_loss) as f64;
        let weighted = tape.scale(g_loss, config.adv_weight as f32);
        objective = tape.add(objective, weighted)?;
    }
    let total = tape.scalar(objective) as f64;
    if total.is_finite() {
        tape.backward(objective)?;
        model.params_mut().collect_grads(&tape, &p)?;
        adam.step(model.params_mut().tensors_mut())?;
    }
    Ok(StepLosses {
        total,
        high,
        overall,
        adv,
    })
}

/// Deterministic shuffle of `0..n` split into `(train, test)` with
/// `n_test` test indices.
pub fn train_test_split(n: usize, n_test: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_test > n {
        return Err(arg_err!("cannot hold out {n_test} of {n} items"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        idx.swap(i, j);
    }
    let test = idx.split_off(n - n_test);
    Ok((idx, test))
}
