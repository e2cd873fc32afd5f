//! Relativistic-average adversarial learning on high-frequency volumes.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

pub use crate::autodiff::RaganRole;
use crate::autodiff::{Tape, Var};
use crate::error::{arg_err, shape_err, Result};
use crate::network::ParamSet;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::volume::{DomainTag, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscriminatorConfig {
    /// Width of the first level; doubled at every further level.
    pub channels: usize,
    /// Encoder levels, each ending in 2x downsampling.
    pub depth: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            channels: 8,
            depth: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    weight: usize,
    bias: usize,
}

/// U-Net-encoder-shaped critic ending in a global average and a linear
/// score.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<T> {
    config: DiscriminatorConfig,
    params: ParamSet<T>,
    levels: Vec<[Slot; 2]>,
    score: Slot,
}

impl<T: Scalar> Discriminator<T> {
    /// He-initialized weights from `seed`, or all zeros when `seed` is `None`.
    pub fn new(config: DiscriminatorConfig, seed: Option<u64>) -> Result<Self> {
        if config.channels == 0 || config.depth == 0 {
            return Err(arg_err!("discriminator needs positive channels and depth"));
        }
        let mut rng = SplitMix64::new(seed.unwrap_or(0));
        let mut params = ParamSet::new();
        let mut conv = |name: &str, cout: usize, cin: usize, k: usize| {
            let shape = [cout, cin, k, k, k];
            let fan_in = (cin * k * k * k) as f64;
            let w = match seed {
                Some(_) => Tensor::randn(&shape, Float::sqrt(2.0 / fan_in), &mut rng),
                None => Tensor::zeros(&shape),
            };
            Slot {
                weight: params.push(&format!("{name}.weight"), w),
                bias: params.push(&format!("{name}.bias"), Tensor::zeros(&[cout])),
            }
        };
        let width = |l: usize| config.channels << l;
        let mut levels = Vec::with_capacity(config.depth);
        for l in 0..config.depth {
            let cin = if l == 0 { 1 } else { width(l - 1) };
            levels.push([
                conv(&format!("disc.level{l}.conv0"), width(l), cin, 3),
                conv(&format!("disc.level{l}.conv1"), width(l), width(l), 3),
            ]);
        }
        let score = conv("disc.score", 1, width(config.depth - 1), 1);
        Ok(Self {
            config,
            params,
            levels,
            score,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn downsampling(&self) -> usize {
        1 << self.config.depth
    }

    /// Scalar score of a `[1, D, H, W]` input, on bound parameters `p`.
    pub fn forward(&self, tape: &mut Tape<T>, p: &[Var], input: Var) -> Result<Var> {
        let s = tape.shape(input).to_vec();
        if s.len() != 4 || s[0] != 1 {
            return Err(shape_err!("discriminator expects [1, D, H, W], got {s:?}"));
        }
        let f = self.downsampling();
        for (name, &n) in ["depth", "height", "width"].iter().zip(&s[1..]) {
            if n % f != 0 {
                return Err(shape_err!(
                    "{name} axis extent {n} is not divisible by the discriminator's downsampling factor {f}"
                ));
            }
        }
        let mut h = input;
        for level in &self.levels {
            for slot in level {
                h = tape.conv3d(h, p[slot.weight], Some(p[slot.bias]))?;
                h = tape.relu(h);
            }
            h = tape.avg_pool2(h)?;
        }
        let pooled = tape.global_avg_pool(h)?;
        tape.conv3d(pooled, p[self.score.weight], Some(p[self.score.bias]))
    }

    /// Score with frozen parameters.
    pub fn score(&self, input: &Tensor<T>) -> Result<T> {
        let mut tape = Tape::new();
        let p = self.params.bind_frozen(&mut tape);
        let x = tape.constant(input);
        let s = self.forward(&mut tape, &p, x)?;
        Ok(tape.scalar(s))
    }
}

impl Discriminator<f32> {
    /// Scores a high-frequency CT volume; any other domain is rejected.
    pub fn score_volume(&self, v: &Volume) -> Result<f32> {
        v.expect_tag(DomainTag::CtHighFreq)?;
        self.score(&v.to_tensor())
    }
}

/// Scores from one adversarial round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdversarialBatch {
    pub real_scores: Vec<f64>,
    pub fake_scores: Vec<f64>,
}

fn batch_loss(batch: &AdversarialBatch, role: RaganRole) -> Result<f64> {
    let mut tape = Tape::<f64>::new();
    let mut leaf = |x: f64| tape.constant(&Tensor::scalar(x));
    let real: Vec<Var> = batch.real_scores.iter().map(|&x| leaf(x)).collect();
    let fake: Vec<Var> = batch.fake_scores.iter().map(|&x| leaf(x)).collect();
    let l = tape.ragan_loss(&real, &fake, role)?;
    Ok(tape.scalar(l))
}

/// Discriminator loss
/// `-mean log s(r - mean f) - mean log(1 - s(f - mean r))`.
pub fn ragan_d_loss(batch: &AdversarialBatch) -> Result<f64> {
    batch_loss(batch, RaganRole::Discriminator)
}

/// Generator loss
/// `-mean log s(f - mean r) - mean log(1 - s(r - mean f))`.
pub fn ragan_g_loss(batch: &AdversarialBatch) -> Result<f64> {
    batch_loss(batch, RaganRole::Generator)
}
