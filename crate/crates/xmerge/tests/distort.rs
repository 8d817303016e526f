use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xmerge::distort::{
    apply_distortion, split_balanced, synthetic_dataset, DistortionSpec, SyntheticDesign,
};
use xmerge::model::ExpressionMatrix;

fn matrix(seed: u64, genes: usize, arrays: usize) -> ExpressionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = Array2::from_shape_fn((genes, arrays), |(g, _)| {
        (g % 17) as f64 * 0.3 + rng.random_range(-1.0..1.0)
    });
    ExpressionMatrix::new(
        (0..genes).map(|g| format!("g{g}")).collect(),
        (0..arrays).map(|c| format!("a{c}")).collect(),
        values,
    )
    .unwrap()
}

#[test]
fn noise_variance_matches_target() {
    let data = matrix(1, 7295, 21);
    for study in 0..2 {
        let spec = DistortionSpec {
            noise_tune: 2.0,
            seed: 77,
            ..DistortionSpec::default()
        };
        let d = apply_distortion(&data, study, &spec).unwrap();
        let p = d.exponent;
        let residual: Vec<f64> = d
            .distorted
            .values()
            .iter()
            .zip(d.truth.values())
            .map(|(y, x)| y - x.powf(p))
            .collect();
        let n = residual.len() as f64;
        let mean = residual.iter().sum::<f64>() / n;
        let var = residual.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(
            (var / d.tau2_true - 1.0).abs() < 0.05,
            "study {study}: {var} vs {}",
            d.tau2_true
        );
    }
}

#[test]
fn identity_without_noise_returns_truth() {
    let data = matrix(2, 50, 6);
    let spec = DistortionSpec {
        power_exponents: vec![1.0],
        noise_multipliers: vec![1.0],
        noise_tune: 0.0,
        ..DistortionSpec::default()
    };
    let d = apply_distortion(&data, 0, &spec).unwrap();
    assert_eq!(d.distorted, d.truth);
    assert_eq!(d.tau2_true, 0.0);
    let min = d
        .truth
        .values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert!((min - 0.1).abs() < 1e-12);
}

#[test]
fn benchmark_noise_levels() {
    // true noise variances of the three benchmark designs
    let table = [(2.5e-3, 2.25e-2), (4.9e-3, 4.41e-2), (1e-2, 9e-2)];
    let base = synthetic_dataset(&SyntheticDesign::default()).unwrap();
    let split = split_balanced(&base.matrix, &base.labels, 0).unwrap();
    let unit = DistortionSpec::default();
    let t1 = apply_distortion(&split.first, 0, &unit).unwrap().tau2_true;
    let t2 = apply_distortion(&split.second, 1, &unit).unwrap().tau2_true;
    let tune = (2.5e-3 / t1).sqrt();
    let ratio2 = t2 / t1;
    for ((tau1, tau2), scale) in table.iter().zip([1.0, 1.4, 2.0]) {
        let spec = DistortionSpec {
            noise_tune: tune * scale,
            ..DistortionSpec::default()
        };
        let d1 = apply_distortion(&split.first, 0, &spec).unwrap();
        let d2 = apply_distortion(&split.second, 1, &spec).unwrap();
        assert!((d1.tau2_true / tau1 - 1.0).abs() < 1e-9);
        // the second study's noise is three times larger relative to its own spread
        assert!((d2.tau2_true / (tau1 * ratio2) - 1.0).abs() < 1e-9);
        assert!((9.0 * tau1 / tau2 - 1.0).abs() < 1e-9);
    }
}

#[test]
fn split_is_balanced_and_reproducible() {
    let data = matrix(3, 20, 21);
    let labels: Vec<String> = (0..21)
        .map(|c| if c < 10 { "a" } else { "b" }.to_string())
        .collect();
    let s = split_balanced(&data, &labels, 4).unwrap();
    assert_eq!(s, split_balanced(&data, &labels, 4).unwrap());
    let count = |l: &[String], v: &str| l.iter().filter(|x| *x == v).count();
    assert_eq!(
        (count(&s.first_labels, "a"), count(&s.first_labels, "b")),
        (5, 5)
    );
    assert_eq!(
        (count(&s.second_labels, "a"), count(&s.second_labels, "b")),
        (5, 6)
    );
    let mut all: Vec<usize> = s
        .first_columns
        .iter()
        .chain(&s.second_columns)
        .copied()
        .collect();
    all.sort_unstable();
    assert_eq!(all, (0..21).collect::<Vec<_>>());
}

#[test]
fn synthetic_design_is_reproducible() {
    let design = SyntheticDesign {
        n_genes: 300,
        n_differential: 20,
        seed: 9,
        ..SyntheticDesign::default()
    };
    let a = synthetic_dataset(&design).unwrap();
    assert_eq!(a, synthetic_dataset(&design).unwrap());
    assert_eq!(a.differential.len(), 20);
    assert!(a.directions.iter().all(|d| *d == 1 || *d == -1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noiseless_power_preserves_order(seed in 0u64..1000, p in 0.2f64..3.0) {
        let data = matrix(seed, 30, 4);
        let spec = DistortionSpec {
            power_exponents: vec![p],
            noise_multipliers: vec![1.0],
            noise_tune: 0.0,
            seed,
            standardize: seed % 2 == 0,
        };
        let d = apply_distortion(&data, 0, &spec).unwrap();
        let x: Vec<f64> = data.values().iter().copied().collect();
        let y: Vec<f64> = d.distorted.values().iter().copied().collect();
        for i in 0..x.len() {
            for j in 0..x.len() {
                if x[i] < x[j] {
                    prop_assert!(y[i] < y[j]);
                }
            }
        }
    }

    #[test]
    fn noise_variance_is_quadratic_in_tune(seed in 0u64..1000, tune in 0.01f64..20.0) {
        let data = matrix(seed, 40, 5);
        let at = |t: f64| apply_distortion(&data, 1, &DistortionSpec { noise_tune: t, seed, ..DistortionSpec::default() }).unwrap().tau2_true;
        let unit = at(1.0);
        prop_assert!((at(tune) - tune * tune * unit).abs() <= 1e-12 * at(tune).max(1e-300));
    }
}
