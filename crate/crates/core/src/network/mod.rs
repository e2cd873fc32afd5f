//! The synthesis network: a pluggable base network, the frequency
//! decomposition layer, the factorized high-frequency refinement module and
//! the two output heads.

mod count;
mod layers;
mod params;

pub use count::{kernel_elements_per_pair, param_count, Arrangement};
pub use layers::{
    decomposition_forward, refinement_branch, refinement_forward, ConvVars, Decomposed, BRANCH_AXES,
};
pub use params::ParamSet;

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::autodiff::{Tape, Var};
use crate::error::{arg_err, shape_err, Result};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseKind {
    FcNet,
    UNet,
}

impl BaseKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "fcnet" | "fc" => Ok(Self::FcNet),
            "unet" => Ok(Self::UNet),
            _ => Err(arg_err!("unknown base network {s:?} (expected fcnet or unet)")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::FcNet => "fcnet",
            Self::UNet => "unet",
        }
    }

    pub fn default_depth(self) -> usize {
        match self {
            Self::FcNet => 4,
            Self::UNet => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaseNetworkConfig {
    pub kind: BaseKind,
    /// Feature width `C` of the penultimate layer.
    pub channels: usize,
    /// Convolution layers (FC-Net) or pooling levels (U-Net).
    pub depth: usize,
    pub input_channels: usize,
}

impl BaseNetworkConfig {
    pub fn new(kind: BaseKind, channels: usize) -> Self {
        Self {
            kind,
            channels,
            depth: kind.default_depth(),
            input_channels: 1,
        }
    }

    /// Required divisor of every spatial extent.
    pub fn spatial_divisor(&self) -> usize {
        match self.kind {
            BaseKind::FcNet => 1,
            BaseKind::UNet => 1 << self.depth,
        }
    }

    pub fn check_input(&self, dims: [usize; 3]) -> Result<()> {
        let div = self.spatial_divisor();
        for (name, n) in ["depth", "height", "width"].iter().zip(dims) {
            if n % div != 0 {
                return Err(shape_err!(
                    "{name} axis extent {n} is not divisible by {div} (U-Net depth {})",
                    self.depth
                ));
            }
        }
        Ok(())
    }
}

/// How the output is produced from the base features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// Decomposition layer, refinement module, low and high heads.
    FrequencySupervised,
    /// A single linear head on the base features.
    OverallOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub base: BaseNetworkConfig,
    /// Width of the 1D refinement kernels.
    pub refine_k: usize,
    pub head: HeadKind,
}

impl ModelConfig {
    pub fn new(kind: BaseKind, channels: usize, refine_k: usize) -> Self {
        Self {
            base: BaseNetworkConfig::new(kind, channels),
            refine_k,
            head: HeadKind::FrequencySupervised,
        }
    }

    pub fn overall_only(mut self) -> Self {
        self.head = HeadKind::OverallOnly;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.base.channels == 0 || self.base.input_channels == 0 {
            return Err(arg_err!("channel counts must be positive"));
        }
        if self.base.depth == 0 {
            return Err(arg_err!("base network depth must be at least 1"));
        }
        if self.refine_k == 0 || self.refine_k % 2 == 0 {
            return Err(arg_err!("refinement kernel width {} must be odd", self.refine_k));
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(BaseKind::UNet, 32, 13)
    }
}

/// Parameter indices of one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ConvSlot {
    weight: usize,
    bias: usize,
}

impl ConvSlot {
    fn vars(self, p: &[Var]) -> ConvVars {
        ConvVars {
            weight: p[self.weight],
            bias: Some(p[self.bias]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum BaseLayout {
    FcNet(Vec<ConvSlot>),
    UNet {
        down: Vec<[ConvSlot; 2]>,
        bottom: [ConvSlot; 2],
        up: Vec<[ConvSlot; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum HeadLayout {
    Frequency {
        decomp: ConvSlot,
        refine: [[ConvSlot; 3]; 3],
        low: ConvSlot,
        high: ConvSlot,
    },
    Overall {
        head: ConvSlot,
    },
}

/// Parameter initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// He-normal weights (`std = sqrt(2 / fan_in)`), zero biases.
    He { seed: u64 },
    Zeros,
}

struct Builder<'a, T> {
    params: &'a mut ParamSet<T>,
    init: Init,
    rng: SplitMix64,
}

impl<T: Scalar> Builder<'_, T> {
    fn conv(&mut self, name: &str, cout: usize, cin: usize, kernel_shape: &[usize]) -> ConvSlot {
        let mut shape = alloc::vec![cout, cin];
        shape.extend_from_slice(kernel_shape);
        let fan_in = cin * kernel_shape.iter().product::<usize>();
        let w = match self.init {
            Init::He { .. } => Tensor::randn(&shape, Float::sqrt(2.0 / fan_in as f64), &mut self.rng),
            Init::Zeros => Tensor::zeros(&shape),
        };
        let weight = self.params.push(&format!("{name}.weight"), w);
        let bias = self.params.push(&format!("{name}.bias"), Tensor::zeros(&[cout]));
        ConvSlot { weight, bias }
    }

    fn conv3(&mut self, name: &str, cout: usize, cin: usize, k: usize) -> ConvSlot {
        self.conv(name, cout, cin, &[k, k, k])
    }
}

/// Output volumes of one forward pass, all `[1, D, H, W]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOutput {
    /// Low-frequency prediction (absent for [`HeadKind::OverallOnly`]).
    pub low: Option<Var>,
    /// High-frequency prediction (absent for [`HeadKind::OverallOnly`]).
    pub high: Option<Var>,
    pub combined: Var,
}

/// Concrete predictions without a tape.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub low: Option<Tensor<T>>,
    pub high: Option<Tensor<T>>,
    pub combined: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisModel<T> {
    config: ModelConfig,
    params: ParamSet<T>,
    base: BaseLayout,
    head: HeadLayout,
}

impl<T: Scalar> SynthesisModel<T> {
    pub fn new(config: ModelConfig, init: Init) -> Result<Self> {
        config.validate()?;
        let seed = match init {
            Init::He { seed } => seed,
            Init::Zeros => 0,
        };
        let mut params = ParamSet::new();
        let mut b = Builder {
            params: &mut params,
            init,
            rng: SplitMix64::new(seed),
        };
        let c = config.base.channels;
        let cin = config.base.input_channels;
        let base = match config.base.kind {
            BaseKind::FcNet => {
                let mut convs = Vec::with_capacity(config.base.depth);
                for i in 0..config.base.depth {
                    let inp = if i == 0 { cin } else { c };
                    convs.push(b.conv3(&format!("base.conv{i}"), c, inp, 3));
                }
                BaseLayout::FcNet(convs)
            }
            BaseKind::UNet => {
                let depth = config.base.depth;
                let width = |level: usize| c << level;
                let mut down = Vec::with_capacity(depth);
                for level in 0..depth {
                    let inp = if level == 0 { cin } else { width(level - 1) };
                    down.push([
                        b.conv3(&format!("base.down{level}.conv0"), width(level), inp, 3),
                        b.conv3(&format!("base.down{level}.conv1"), width(level), width(level), 3),
                    ]);
                }
                let bottom = [
                    b.conv3("base.bottom.conv0", width(depth), width(depth - 1), 3),
                    b.conv3("base.bottom.conv1", width(depth), width(depth), 3),
                ];
                let mut up = Vec::with_capacity(depth);
                for level in (0..depth).rev() {
                    up.push([
                        b.conv3(
                            &format!("base.up{level}.conv0"),
                            width(level),
                            width(level) + width(level + 1),
                            3,
                        ),
                        b.conv3(&format!("base.up{level}.conv1"), width(level), width(level), 3),
                    ]);
                }
                BaseLayout::UNet { down, bottom, up }
            }
        };
        let head = match config.head {
            HeadKind::FrequencySupervised => {
                let decomp = b.conv3("decomp", 2, c, 3);
                let k = config.refine_k;
                let mut slot = |br: usize, i: usize| b.conv(&format!("refine.b{br}.c{i}"), c, c, &[k]);
                let refine = [
                    [slot(0, 0), slot(0, 1), slot(0, 2)],
                    [slot(1, 0), slot(1, 1), slot(1, 2)],
                    [slot(2, 0), slot(2, 1), slot(2, 2)],
                ];
                let low = b.conv3("head_low", 1, c, 3);
                let high = b.conv3("head_high", 1, c, 3);
                HeadLayout::Frequency {
                    decomp,
                    refine,
                    low,
                    high,
                }
            }
            HeadKind::OverallOnly => HeadLayout::Overall {
                head: b.conv3("head", 1, c, 3),
            },
        };
        Ok(Self {
            config,
            params,
            base,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    /// Weight elements of the refinement module (biases excluded).
    pub fn refinement_weight_count(&self) -> usize {
        self.params
            .iter()
            .filter(|(n, _)| n.starts_with("refine.") && n.ends_with(".weight"))
            .map(|(_, t)| t.len())
            .sum()
    }

    /// Base network features `V`, `[C, D, H, W]`.
    pub fn base_forward(&self, tape: &mut Tape<T>, p: &[Var], x: Var) -> Result<Var> {
        let s = tape.shape(x).to_vec();
        if s.len() != 4 || s[0] != self.config.base.input_channels {
            return Err(shape_err!(
                "base network expects [{}, D, H, W] input, got {s:?}",
                self.config.base.input_channels
            ));
        }
        self.config.base.check_input([s[1], s[2], s[3]])?;
        let conv_relu = |tape: &mut Tape<T>, slot: ConvSlot, x: Var| -> Result<Var> {
            let v = slot.vars(p);
            let y = tape.conv3d(x, v.weight, v.bias)?;
            Ok(tape.relu(y))
        };
        match &self.base {
            BaseLayout::FcNet(convs) => {
                let mut h = x;
                for &slot in convs {
                    h = conv_relu(tape, slot, h)?;
                }
                Ok(h)
            }
            BaseLayout::UNet { down, bottom, up } => {
                let mut skips = Vec::with_capacity(down.len());
                let mut h = x;
                for level in down {
                    h = conv_relu(tape, level[0], h)?;
                    h = conv_relu(tape, level[1], h)?;
                    skips.push(h);
                    h = tape.avg_pool2(h)?;
                }
                h = conv_relu(tape, bottom[0], h)?;
                h = conv_relu(tape, bottom[1], h)?;
                for level in up {
                    let skip = skips.pop().expect("one skip per level");
                    let u = tape.upsample2(h)?;
                    let cat = tape.concat(skip, u)?;
                    h = conv_relu(tape, level[0], cat)?;
                    h = conv_relu(tape, level[1], h)?;
                }
                Ok(h)
            }
        }
    }

    /// Full forward pass on bound parameters `p` (from [`ParamSet::bind`]).
    pub fn forward(&self, tape: &mut Tape<T>, p: &[Var], x: Var) -> Result<ModelOutput> {
        let v = self.base_forward(tape, p, x)?;
        match &self.head {
            HeadLayout::Frequency {
                decomp,
                refine,
                low,
                high,
            } => {
                let parts = decomposition_forward(tape, decomp.vars(p), v)?;
                let kernels = refine.map(|branch| branch.map(|s| s.vars(p)));
                let refined = refinement_forward(tape, &kernels, parts.high, true)?;
                let (lv, hv) = (low.vars(p), high.vars(p));
                let y_low = tape.conv3d(parts.low, lv.weight, lv.bias)?;
                let y_high = tape.conv3d(refined, hv.weight, hv.bias)?;
                let combined = tape.add(y_low, y_high)?;
                Ok(ModelOutput {
                    low: Some(y_low),
                    high: Some(y_high),
                    combined,
                })
            }
            HeadLayout::Overall { head } => {
                let hv = head.vars(p);
                let combined = tape.conv3d(v, hv.weight, hv.bias)?;
                Ok(ModelOutput {
                    low: None,
                    high: None,
                    combined,
                })
            }
        }
    }

    /// Forward pass with frozen parameters.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Prediction<T>> {
        let mut tape = Tape::new();
        let p = self.params.bind_frozen(&mut tape);
        let x = tape.constant(input);
        let out = self.forward(&mut tape, &p, x)?;
        Ok(Prediction {
            low: out.low.map(|v| tape.to_tensor(v)),
            high: out.high.map(|v| tape.to_tensor(v)),
            combined: tape.to_tensor(out.combined),
        })
    }
}
