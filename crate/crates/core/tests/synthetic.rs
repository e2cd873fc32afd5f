use freqsynth_core::frequency::{decompose, GaussianSpec};
use freqsynth_core::synthetic::{generate_pair, GeneratorSpec};
use freqsynth_core::DomainTag;

#[test]
fn same_spec_same_pair() {
    let spec = GeneratorSpec::new([10, 12, 9], 77);
    assert_eq!(generate_pair(&spec).unwrap(), generate_pair(&spec).unwrap());
    assert_ne!(generate_pair(&spec).unwrap(), generate_pair(&spec.with_seed(78)).unwrap());
}

#[test]
fn degenerate_spec_is_constant() {
    let spec = GeneratorSpec { n_blobs: 0, noise_sigma: 0.0, shell_contrast: 0.0, ..GeneratorSpec::new([8, 8, 8], 1) };
    let (mr, ct) = generate_pair(&spec).unwrap();
    assert_eq!(mr.min_max().0, mr.min_max().1);
    assert_eq!(ct.min_max().0, ct.min_max().1);
    let high = decompose(&ct, &GaussianSpec::new(2.0).unwrap()).unwrap().high;
    assert!(high.data().iter().all(|&v| v == 0.0));
}

#[test]
fn default_phantom_has_high_frequency_content() {
    let (mr, ct) = generate_pair(&GeneratorSpec::new([24; 3], 0)).unwrap();
    assert_eq!((mr.tag(), ct.tag()), (DomainTag::MrRaw, DomainTag::CtHu));
    assert!(mr.data().iter().all(|v| v.is_finite()));
    let high = decompose(&ct, &GaussianSpec::new(2.0).unwrap()).unwrap().high;
    let mean = ct.data().iter().map(|&v| v as f64).sum::<f64>() / ct.len() as f64;
    let e_high: f64 = high.data().iter().map(|&v| (v as f64).powi(2)).sum();
    let e_total: f64 = ct.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum();
    assert!(e_high / e_total > 0.05, "{}", e_high / e_total);
}

#[test]
fn ct_stays_in_range() {
    for seed in 0..5 {
        let spec = GeneratorSpec { shell_contrast: 5000.0, ..GeneratorSpec::new([9, 9, 9], seed) };
        let (_, ct) = generate_pair(&spec).unwrap();
        let (lo, hi) = ct.min_max();
        assert!(lo as f64 >= spec.range.min_hu && hi as f64 <= spec.range.max_hu);
    }
}
