#![allow(dead_code)]

//! Finite-difference checks of every differentiable building block, shared
//! by the unit tests and the acceptance run.

use freqsynth_core::autodiff::RaganRole;
use freqsynth_core::network::{decomposition_forward, refinement_forward, BaseKind, ConvVars, Init, ModelConfig, SynthesisModel};
use freqsynth_core::rng::SplitMix64;
use freqsynth_core::training::total_loss;
use freqsynth_core::{Axis, Tape, Tensor, Var};

use super::gradcheck::{check, GradReport};

pub type Case = (String, GradReport);

fn randn(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::randn(shape, 1.0, &mut SplitMix64::new(seed))
}

/// Smooth scalarization `sum(w * y)` for a fixed random `w`.
fn weighted_sum(t: &mut Tape<f64>, y: Var, seed: u64) -> Var {
    let mut shape = t.shape(y).to_vec();
    shape[0] = 2;
    let w = randn(&shape, seed);
    let w = t.constant(&w);
    let mut total = None;
    for c in 0..t.shape(y)[0] {
        let yc = channel(t, y, c);
        let g = t.gate(w, 0, yc).unwrap();
        let s = t.sum(g);
        total = Some(match total {
            None => s,
            Some(acc) => t.add(acc, s).unwrap(),
        });
    }
    total.unwrap()
}

/// Channel `c` of `y` via a one-hot 1x1x1 convolution.
fn channel(t: &mut Tape<f64>, y: Var, c: usize) -> Var {
    let cin = t.shape(y)[0];
    let mut k = vec![0.0; cin];
    k[c] = 1.0;
    let k = t.constant_from(&[1, cin, 1, 1, 1], k).unwrap();
    t.conv3d(y, k, None).unwrap()
}

/// `b = a + d` with `|d|` in `[0.5, 1]`, far from the L1 kink.
fn separated(a: &Tensor<f64>, seed: u64) -> Tensor<f64> {
    let mut rng = SplitMix64::new(seed);
    let data = a
        .data()
        .iter()
        .map(|&v| {
            let d = rng.uniform(0.5, 1.0);
            if rng.below(2) == 0 { v + d } else { v - d }
        })
        .collect();
    Tensor::new(a.shape(), data).unwrap()
}

pub fn conv3d() -> Vec<Case> {
    let inputs = [randn(&[2, 5, 4, 6], 1), randn(&[3, 2, 3, 3, 3], 2), randn(&[3], 3)];
    let r = check(&inputs, |t, v| {
        let y = t.conv3d(v[0], v[1], Some(v[2])).unwrap();
        weighted_sum(t, y, 4)
    });
    vec![("conv3d".into(), r)]
}

pub fn conv1d_axis() -> Vec<Case> {
    Axis::ALL
        .into_iter()
        .map(|axis| {
            let inputs = [randn(&[2, 5, 6, 7], 10), randn(&[3, 2, 5], 11), randn(&[3], 12)];
            let r = check(&inputs, |t, v| {
                let y = t.conv1d_axis(v[0], v[1], axis, Some(v[2])).unwrap();
                weighted_sum(t, y, 13)
            });
            (format!("conv1d_axis {axis:?}"), r)
        })
        .collect()
}

pub fn softmax() -> Vec<Case> {
    let inputs = [randn(&[3, 4, 4, 4], 20)];
    let r = check(&inputs, |t, v| {
        let p = t.softmax_channels(v[0]).unwrap();
        weighted_sum(t, p, 21)
    });
    vec![("softmax_channels".into(), r)]
}

pub fn l1() -> Vec<Case> {
    let a = randn(&[1, 6, 6, 6], 30);
    let b = separated(&a, 31);
    vec![("l1_mean".into(), check(&[a, b], |t, v| t.l1_mean(v[0], v[1]).unwrap()))]
}

pub fn decomposition() -> Vec<Case> {
    let inputs = [randn(&[3, 4, 5, 4], 40), randn(&[2, 3, 3, 3, 3], 41), randn(&[2], 42)];
    let r = check(&inputs, |t, v| {
        let d = decomposition_forward(t, ConvVars { weight: v[1], bias: Some(v[2]) }, v[0]).unwrap();
        let a = weighted_sum(t, d.low, 43);
        let b = weighted_sum(t, d.high, 44);
        t.add(a, b).unwrap()
    });
    vec![("decomposition_forward".into(), r)]
}

fn refinement_case(relu: bool) -> GradReport {
    let c = 2;
    let mut inputs = vec![randn(&[c, 5, 5, 5], 50)];
    for i in 0..9 {
        inputs.push(randn(&[c, c, 3], 60 + i));
        inputs.push(randn(&[c], 80 + i));
    }
    check(&inputs, |t, v| {
        let convs: [[ConvVars; 3]; 3] = core::array::from_fn(|b| {
            core::array::from_fn(|j| {
                let i = 1 + 2 * (3 * b + j);
                ConvVars { weight: v[i], bias: Some(v[i + 1]) }
            })
        });
        let y = refinement_forward(t, &convs, v[0], relu).unwrap();
        weighted_sum(t, y, 51)
    })
}

pub fn refinement() -> Vec<Case> {
    vec![
        ("refinement_forward".into(), refinement_case(true)),
        ("refinement_forward (linear)".into(), refinement_case(false)),
    ]
}

fn full_loss_case(kind: BaseKind, seed: u64) -> GradReport {
    let config = ModelConfig::new(kind, 2, 3);
    let mut model = SynthesisModel::<f64>::new(config, Init::He { seed }).unwrap();
    // Zero-initialized biases park many ReLU inputs exactly on the kink.
    let names: Vec<String> = model.params().names().to_vec();
    for (i, name) in names.iter().enumerate() {
        if name.ends_with(".bias") {
            let n = model.params().get(i).len();
            let b = randn(&[n], seed + 10 + i as u64).map(|v| 0.1 * v);
            model.params_mut().assign(name, b.data()).unwrap();
        }
    }
    let mut inputs: Vec<Tensor<f64>> = model.params().tensors().to_vec();
    let np = inputs.len();
    let x = randn(&[1, 8, 8, 8], seed + 1);
    let pred = model.predict(&x).unwrap();
    inputs.push(x);
    inputs.push(separated(&pred.combined, seed + 2));
    inputs.push(separated(pred.high.as_ref().unwrap(), seed + 3));
    check(&inputs, |t, v| {
        let out = model.forward(t, &v[..np], v[np]).unwrap();
        total_loss(t, out.low.unwrap(), out.high.unwrap(), v[np + 1], v[np + 2]).unwrap().total
    })
}

pub fn full_loss() -> Vec<Case> {
    vec![
        ("total loss (fcnet)".into(), full_loss_case(BaseKind::FcNet, 100)),
        ("total loss (unet)".into(), full_loss_case(BaseKind::UNet, 200)),
    ]
}

pub fn ragan() -> Vec<Case> {
    let inputs = [randn(&[1], 300), randn(&[1], 301), randn(&[1], 302), randn(&[1], 303), randn(&[1], 304)];
    [RaganRole::Discriminator, RaganRole::Generator]
        .into_iter()
        .map(|role| {
            let r = check(&inputs, |t, v| t.ragan_loss(&v[..2], &v[2..], role).unwrap());
            (format!("ragan {role:?}"), r)
        })
        .collect()
}

pub fn relu() -> Vec<Case> {
    let inputs = [randn(&[2, 5, 5, 5], 70)];
    let r = check(&inputs, |t, v| {
        let y = t.relu(v[0]);
        weighted_sum(t, y, 71)
    });
    vec![("relu".into(), r)]
}

pub fn pool_upsample_concat() -> Vec<Case> {
    let inputs = [randn(&[2, 4, 4, 4], 72), randn(&[1, 4, 4, 4], 73)];
    let r = check(&inputs, |t, v| {
        let p = t.avg_pool2(v[0]).unwrap();
        let u = t.upsample2(p).unwrap();
        let c = t.concat(u, v[1]).unwrap();
        let g = t.global_avg_pool(c).unwrap();
        let s = weighted_sum(t, c, 74);
        let gs = t.sum(g);
        t.add(s, gs).unwrap()
    });
    vec![("pool/upsample/concat".into(), r)]
}

pub fn discriminator_score() -> Vec<Case> {
    use freqsynth_core::adversarial::{Discriminator, DiscriminatorConfig};
    let mut d = Discriminator::<f64>::new(DiscriminatorConfig { channels: 2, depth: 2 }, Some(5)).unwrap();
    let names: Vec<String> = d.params().names().to_vec();
    for (i, name) in names.iter().enumerate() {
        if name.ends_with(".bias") {
            let n = d.params().get(i).len();
            let b = randn(&[n], 600 + i as u64).map(|v| 0.1 * v);
            d.params_mut().assign(name, b.data()).unwrap();
        }
    }
    let r = check(&[randn(&[1, 8, 8, 8], 7)], |t, v| {
        let p = d.params().bind_frozen(t);
        let s = d.forward(t, &p, v[0]).unwrap();
        t.sum(s)
    });
    vec![("discriminator score".into(), r)]
}

/// Every check, in a fixed order.
pub fn all() -> Vec<Case> {
    let groups: [fn() -> Vec<Case>; 11] = [
        conv3d,
        conv1d_axis,
        softmax,
        l1,
        decomposition,
        refinement,
        full_loss,
        ragan,
        relu,
        pool_upsample_concat,
        discriminator_score,
    ];
    groups.iter().flat_map(|g| g()).collect()
}
