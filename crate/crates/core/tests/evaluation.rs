mod support;

use freqsynth_core::evaluation::{
    band_errors, dice, error_map, evaluate, mae, psnr, ssim, threshold_segment, EvalConfig, SegmentationMask,
};
use freqsynth_core::frequency::{decompose, GaussianSpec};
use freqsynth_core::rng::SplitMix64;
use freqsynth_core::{DomainTag, Volume};
use proptest::prelude::*;
use support::oracles;

fn random(dims: [usize; 3], tag: DomainTag, lo: f64, hi: f64, seed: u64) -> Volume {
    let mut rng = SplitMix64::new(seed);
    Volume::from_fn(dims, tag, |_, _, _| rng.uniform(lo, hi) as f32).unwrap()
}

fn hu(dims: [usize; 3], seed: u64) -> Volume {
    random(dims, DomainTag::CtHu, -1024.0, 2252.7, seed)
}

fn norm(dims: [usize; 3], seed: u64) -> Volume {
    random(dims, DomainTag::CtNorm, 0.0, 1.0, seed)
}

#[test]
fn mae_examples() {
    let a = hu([3, 3, 3], 1);
    assert_eq!(mae(&a, &a).unwrap(), 0.0);
    assert!(error_map(&a, &a).unwrap().data().iter().all(|&v| v == 0.0));
    let shifted = a.with_data(a.data().iter().map(|v| v + 100.0).collect(), DomainTag::CtHu).unwrap();
    assert!((mae(&shifted, &a).unwrap() - 100.0).abs() < 1e-3);
    let b = hu([3, 3, 3], 2);
    assert_eq!(mae(&a, &b).unwrap(), oracles::mae(a.data(), b.data()));
    assert!(mae(&a, &hu([3, 3, 4], 2)).is_err());
}

#[test]
fn psnr_examples() {
    let a = norm([4, 4, 4], 3);
    assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    let base = Volume::filled([4, 4, 4], 0.5, DomainTag::CtNorm).unwrap();
    let err = |e: f32| base.with_data(vec![0.5 + e; 64], DomainTag::CtNorm).unwrap();
    let p1 = psnr(&err(0.1), &base).unwrap();
    let p2 = psnr(&err(0.05), &base).unwrap();
    assert!((p1 - 20.0).abs() < 1e-5);
    assert!((p2 - p1 - 20.0 * 2f64.log10()).abs() < 1e-5);
}

#[test]
fn metric_oracles_across_sizes() {
    for (n, seed) in [(3usize, 10u64), (5, 11), (8, 12), (16, 13)] {
        let dims = [n, n, n];
        let (a, b) = (hu(dims, seed), hu(dims, seed + 100));
        assert!((mae(&a, &b).unwrap() - oracles::mae(a.data(), b.data())).abs() <= 1e-6);
        let (p, q) = (norm(dims, seed), norm(dims, seed + 100));
        assert!((psnr(&p, &q).unwrap() - oracles::psnr(p.data(), q.data())).abs() <= 1e-6);
    }
    for (dims, seed) in [([11, 11, 11], 20u64), ([12, 14, 16], 21), ([16, 16, 16], 22)] {
        let p = norm(dims, seed);
        let q = Volume::from_fn(dims, DomainTag::CtNorm, |z, y, x| {
            (0.5 * p.at(z, y, x) + 0.4 * ((z + y + x) as f32 / 48.0)).clamp(0.0, 1.0)
        })
        .unwrap();
        let got = ssim(&p, &q).unwrap();
        let want = oracles::ssim(p.data(), q.data(), dims);
        assert!((got - want).abs() <= 1e-5, "{got} vs {want}");
    }
}

#[test]
fn ssim_examples() {
    let a = norm([12, 12, 12], 30);
    assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    let zero = Volume::filled([11, 11, 11], 0.0, DomainTag::CtNorm).unwrap();
    let one = Volume::filled([11, 11, 11], 1.0, DomainTag::CtNorm).unwrap();
    let got = ssim(&zero, &one).unwrap();
    assert!((got - oracles::ssim(zero.data(), one.data(), [11, 11, 11])).abs() < 1e-12);
    let c1 = 1e-4;
    assert!((got - c1 / (1.0 + c1)).abs() < 1e-12);

    let mut flipped = a.data().to_vec();
    flipped[100] = 1.0 - flipped[100];
    let b = a.with_data(flipped, DomainTag::CtNorm).unwrap();
    let s = ssim(&a, &b).unwrap();
    assert!(s > 0.0 && s < 1.0);
}

#[test]
fn segmentation_counts() {
    // 4 voxels below -200, 3 in [-200, 200), 5 at or above 200.
    let values = [-1000.0, -500.0, -201.0, -200.5, -200.0, 0.0, 199.9, 200.0, 300.0, 1000.0, 1500.0, 2000.0];
    let v = Volume::new([1, 3, 4], [1.0; 3], values.to_vec(), DomainTag::CtHu).unwrap();
    let m = threshold_segment(&v, -200.0, 200.0).unwrap();
    assert_eq!(m.histogram(), [4, 3, 5]);
    assert_eq!(dice(&m, &m).unwrap(), [1.0, 1.0, 1.0]);
    assert!(threshold_segment(&v, 200.0, 200.0).is_err());
}

#[test]
fn disjoint_masks() {
    let a = SegmentationMask { dims: [2, 2, 2], classes: vec![1; 8] };
    let b = SegmentationMask { dims: [2, 2, 2], classes: vec![2; 8] };
    assert_eq!(dice(&a, &b).unwrap(), [1.0, 0.0, 0.0]);
}

#[test]
fn evaluate_identical_volumes() {
    let gt = hu([12, 12, 12], 40);
    let r = evaluate(&gt, &gt, &EvalConfig::default()).unwrap();
    assert_eq!(r.mae, 0.0);
    assert_eq!(r.ssim, 1.0);
    assert_eq!(r.psnr, f64::INFINITY);
    assert_eq!(r.dice, [1.0, 1.0, 1.0]);
    assert_eq!((r.mae_low, r.mae_high), (0.0, 0.0));
}

#[test]
fn low_band_prediction_errors() {
    // Predicting only the low band leaves the high band entirely as error.
    // Because the blur is not idempotent, the low-band error is the
    // low-pass of the high band rather than exactly zero.
    let spec = GaussianSpec::new(2.0).unwrap();
    let gt = Volume::from_fn([12, 12, 12], DomainTag::CtHu, |z, y, x| ((z * 37 + y * 11 + x * 5) % 400) as f32 - 100.0).unwrap();
    let bands = decompose(&gt, &spec).unwrap();
    let pred = bands.low.clone().retag(DomainTag::CtHu).unwrap();
    let (mae_low, mae_high) = band_errors(&pred, &gt, &spec).unwrap();
    let pred_bands = decompose(&pred, &spec).unwrap();
    let want_high = oracles::mae(pred_bands.high.data(), bands.high.data());
    let want_low = oracles::mae(pred_bands.low.data(), bands.low.data());
    assert!((mae_high - want_high).abs() < 1e-9 && (mae_low - want_low).abs() < 1e-9);
    let mean_abs_high = bands.high.data().iter().map(|v| v.abs() as f64).sum::<f64>() / gt.len() as f64;
    assert!(mae_low < 0.5 * mean_abs_high);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mae_triangle_inequality(s in any::<u64>()) {
        let (a, b, c) = (hu([4, 5, 3], s), hu([4, 5, 3], s ^ 1), hu([4, 5, 3], s ^ 2));
        prop_assert!(mae(&a, &c).unwrap() <= mae(&a, &b).unwrap() + mae(&b, &c).unwrap() + 1e-9);
    }

    #[test]
    fn ssim_symmetric(s in any::<u64>()) {
        let (a, b) = (norm([11, 12, 11], s), norm([11, 12, 11], s ^ 7));
        prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() <= 1e-6);
    }

    #[test]
    fn dice_symmetric(s in any::<u64>()) {
        let (a, b) = (hu([5, 5, 5], s), hu([5, 5, 5], s ^ 3));
        let ma = threshold_segment(&a, -200.0, 200.0).unwrap();
        let mb = threshold_segment(&b, -200.0, 200.0).unwrap();
        prop_assert_eq!(dice(&ma, &mb).unwrap(), dice(&mb, &ma).unwrap());
    }

    #[test]
    fn band_errors_decompose_total_error(s in any::<u64>()) {
        let spec = GaussianSpec::new(1.5).unwrap();
        let mut rng = SplitMix64::new(s);
        let a = Volume::from_fn([6, 7, 5], DomainTag::CtHu, |_, _, _| rng.below(3000) as f32 - 1000.0).unwrap();
        let b = Volume::from_fn([6, 7, 5], DomainTag::CtHu, |_, _, _| rng.below(3000) as f32 - 1000.0).unwrap();
        let (pa, pb) = (decompose(&a, &spec).unwrap(), decompose(&b, &spec).unwrap());
        for i in 0..a.len() {
            let total = a.data()[i] - b.data()[i];
            let parts = (pa.low.data()[i] - pb.low.data()[i]) + (pa.high.data()[i] - pb.high.data()[i]);
            prop_assert!((total as f64 - parts as f64).abs() <= 1e-3, "{} vs {}", total, parts);
        }
    }
}
