use freqsynth_core::error::Result;
use freqsynth_core::inference::{axis_origins, plan_windows, predict_volume, stitch, FnPredictor, VolumePredictor};
use freqsynth_core::network::{BaseKind, Init, ModelConfig, SynthesisModel};
use freqsynth_core::rng::SplitMix64;
use freqsynth_core::{DomainTag, Tape, Tensor, Volume};

fn random_mr(dims: [usize; 3], seed: u64) -> Volume {
    let mut rng = SplitMix64::new(seed);
    Volume::from_fn(dims, DomainTag::MrNorm, |_, _, _| rng.normal() as f32).unwrap()
}

#[test]
fn plan_examples() {
    assert_eq!(plan_windows([16; 3], [16; 3], [8; 3]).unwrap().origins(), vec![[0, 0, 0]]);
    assert_eq!(axis_origins(24, 16, 8).unwrap(), [0, 8]);
    assert_eq!(axis_origins(20, 16, 8).unwrap(), [0, 4]);
    assert!(plan_windows([16, 16, 8], [16; 3], [8; 3]).is_err());
}

#[test]
fn single_window_equals_direct_forward() {
    let m = SynthesisModel::<f32>::new(ModelConfig::new(BaseKind::UNet, 2, 3), Init::He { seed: 4 }).unwrap();
    let mr = random_mr([8, 12, 8], 1);
    let plan = plan_windows(mr.dims(), mr.dims(), [4, 4, 4]).unwrap();
    let s = stitch(&m, &mr, &plan).unwrap();
    let direct = m.predict(&mr.to_tensor()).unwrap();
    assert_eq!(s.combined, direct.combined.data());
    assert_eq!(s.low.as_deref(), Some(direct.low.unwrap().data()));
    assert_eq!(s.high.as_deref(), Some(direct.high.unwrap().data()));
}

#[test]
fn constant_predictor_stitches_constant() {
    let c = 0.3712f32;
    let model = FnPredictor(|x: &Tensor<f32>| -> Result<Tensor<f32>> { Ok(Tensor::full(x.shape(), c)) });
    let mr = random_mr([13, 11, 17], 2);
    let plan = plan_windows(mr.dims(), [6, 5, 7], [5, 2, 3]).unwrap();
    let out = predict_volume(&model, &mr, &plan).unwrap();
    assert!(out.ct.data().iter().all(|&v| v == c));
    assert_eq!(out.ct.tag(), DomainTag::CtNorm);
    assert_eq!(out.clamped, 0);
    assert!(plan.weight_sums().iter().all(|&w| w == 1.0));
}

#[test]
fn stitched_values_are_convex_combinations() {
    let model = FnPredictor(|x: &Tensor<f32>| -> Result<Tensor<f32>> { Ok(x.map(|v| 0.5 + 0.1 * v)) });
    let mr = random_mr([10, 10, 10], 3);
    let plan = plan_windows(mr.dims(), [6; 3], [3; 3]).unwrap();
    let s = stitch(&model, &mr, &plan).unwrap();
    for (o, x) in s.combined.iter().zip(mr.data()) {
        assert!((o - (0.5 + 0.1 * x)).abs() < 1e-6);
    }
}

struct LinearConv {
    kernel: Tensor<f32>,
}

impl LinearConv {
    fn run(&self, x: &Tensor<f32>) -> Tensor<f32> {
        let mut t = Tape::new();
        let xv = t.constant(x);
        let k = t.constant(&self.kernel);
        let y = t.conv3d(xv, k, None).unwrap();
        t.to_tensor(y)
    }
}

impl VolumePredictor for LinearConv {
    fn predict_window(&self, mr: &Tensor<f32>) -> Result<freqsynth_core::inference::WindowPrediction> {
        Ok(freqsynth_core::inference::WindowPrediction { combined: self.run(mr), low: None, high: None })
    }
}

#[test]
fn linear_model_interior_matches_full_volume() {
    let model = LinearConv { kernel: Tensor::randn(&[1, 1, 3, 3, 3], 0.3, &mut SplitMix64::new(5)) };
    let dims = [20, 20, 20];
    let mr = random_mr(dims, 6);
    let (window, stride) = ([10; 3], [5; 3]);
    let plan = plan_windows(dims, window, stride).unwrap();
    let s = stitch(&model, &mr, &plan).unwrap();
    let full = model.run(&mr.to_tensor());
    let r = 1;
    // A voxel is interior if every covering window contains its whole stencil
    // or the window edge coincides with the volume edge.
    let interior = |p: [usize; 3]| {
        plan.origins().iter().all(|o| {
            let covers = (0..3).all(|a| p[a] >= o[a] && p[a] < o[a] + window[a]);
            !covers
                || (0..3).all(|a| {
                    (p[a] >= o[a] + r || o[a] == 0) && (p[a] + r < o[a] + window[a] || o[a] + window[a] == dims[a])
                })
        })
    };
    let mut checked = 0;
    for z in 0..dims[0] {
        for y in 0..dims[1] {
            for x in 0..dims[2] {
                if interior([z, y, x]) {
                    let i = (z * dims[1] + y) * dims[2] + x;
                    assert!((s.combined[i] - full.data()[i]).abs() <= 1e-5);
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn predict_volume_requires_normalized_mr() {
    let model = FnPredictor(|x: &Tensor<f32>| -> Result<Tensor<f32>> { Ok(x.clone()) });
    let raw = Volume::filled([4, 4, 4], 1.0, DomainTag::MrRaw).unwrap();
    let plan = plan_windows([4; 3], [4; 3], [2; 3]).unwrap();
    assert!(predict_volume(&model, &raw, &plan).is_err());
}

#[test]
fn out_of_range_predictions_are_clamped_and_counted() {
    let model = FnPredictor(|x: &Tensor<f32>| -> Result<Tensor<f32>> { Ok(x.map(|v| 2.0 * v)) });
    let mr = random_mr([6, 6, 6], 7);
    let plan = plan_windows([6; 3], [4; 3], [2; 3]).unwrap();
    let out = predict_volume(&model, &mr, &plan).unwrap();
    let (lo, hi) = out.ct.min_max();
    assert!(lo >= 0.0 && hi <= 1.0);
    assert!(out.clamped > 0);
}
