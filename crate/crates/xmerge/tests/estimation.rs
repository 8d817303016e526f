use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xmerge::distort::{
    apply_distortion, split_balanced, synthetic_dataset, DistortionSpec, SyntheticDesign,
};
use xmerge::estimation::{
    estimate_gene_variances, estimate_means, estimate_noise_variances,
    estimate_observation_functions, InvariantSet, InvariantSetSpec,
};
use xmerge::model::{Study, StudySet};
use xmerge::spline::Lambda;

fn random_blocks(seed: u64, n_genes: usize, arrays: &[usize]) -> Vec<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    arrays
        .iter()
        .map(|&n| Array2::from_shape_fn((n_genes, n), |_| rng.random_range(-5.0..5.0)))
        .collect()
}

#[test]
fn means_match_flat_loop() {
    for seed in 0..20 {
        let x = random_blocks(seed, 7, &[3, 5, 2]);
        let mu = estimate_means(&x);
        for g in 0..7 {
            let mut all = Vec::new();
            for m in &x {
                for c in 0..m.ncols() {
                    all.push(m[(g, c)]);
                }
            }
            let oracle = all.iter().sum::<f64>() / all.len() as f64;
            assert!((mu[g] - oracle).abs() < 1e-12);
        }
    }
}

#[test]
fn variances_match_two_pass() {
    for seed in 0..20 {
        let x = random_blocks(seed, 6, &[4, 3]);
        let mu = estimate_means(&x);
        let s2 = estimate_gene_variances(&x, &mu, 0.0).unwrap();
        for (g, s) in s2.iter().enumerate() {
            let all: Vec<f64> = x.iter().flat_map(|m| m.row(g).to_vec()).collect();
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (all.len() - 1) as f64;
            assert!((s - var).abs() < 1e-10 * var.max(1.0));
        }
    }
}

#[test]
fn variance_floor_applies() {
    let x = vec![Array2::from_elem((3, 4), 2.0)];
    let s2 = estimate_gene_variances(&x, &[2.0; 3], 0.25).unwrap();
    assert_eq!(s2, vec![0.25; 3]);
    assert!(estimate_gene_variances(&[Array2::zeros((2, 1))], &[0.0, 0.0], 0.1).is_err());
}

fn simulated_set(n_genes: usize) -> StudySet {
    let design = SyntheticDesign {
        n_genes,
        conditions: vec![("a".into(), 10), ("b".into(), 10)],
        n_differential: n_genes / 10,
        seed: 3,
        ..SyntheticDesign::default()
    };
    let base = synthetic_dataset(&design).unwrap();
    let split = split_balanced(&base.matrix, &base.labels, 3).unwrap();
    let spec = DistortionSpec {
        seed: 3,
        ..DistortionSpec::default()
    };
    let d1 = apply_distortion(&split.first, 0, &spec).unwrap();
    let d2 = apply_distortion(&split.second, 1, &spec).unwrap();
    StudySet::new(vec![
        Study::new("one", d1.distorted, split.first_labels).unwrap(),
        Study::new("two", d2.distorted, split.second_labels).unwrap(),
    ])
    .unwrap()
}

#[test]
fn noise_variance_grows_with_lambda_reg() {
    let data = simulated_set(400);
    let inv = InvariantSet::select(&data, &InvariantSetSpec::default()).unwrap();
    let x = data.observed();
    let fits =
        estimate_observation_functions(&data, &x, &inv, &[Lambda::Gcv, Lambda::Gcv]).unwrap();
    let mut previous: Option<Vec<f64>> = None;
    for reg in [0.0, 0.01, 0.05, 0.1, 0.5, 1.0] {
        let tau2 = estimate_noise_variances(&data, &x, &fits, &inv, reg).unwrap();
        if let Some(p) = &previous {
            for (a, b) in p.iter().zip(&tau2) {
                assert!(b >= a);
            }
        }
        previous = Some(tau2);
    }
    assert!(estimate_noise_variances(&data, &x, &fits, &inv, -0.1).is_err());
}

#[test]
fn invariant_sets_are_sorted_and_sized() {
    let data = simulated_set(500);
    let spec = InvariantSetSpec {
        n_bins: 10,
        fraction: 0.2,
    };
    let inv = InvariantSet::select(&data, &spec).unwrap();
    for genes in &inv.per_study {
        assert!(genes.windows(2).all(|w| w[0] < w[1]));
        assert!(genes.len() >= 80 && genes.len() <= 120, "{}", genes.len());
    }
    assert!(InvariantSetSpec {
        n_bins: 1,
        fraction: 0.1
    }
    .validate()
    .is_err());
    assert!(InvariantSetSpec {
        n_bins: 5,
        fraction: 0.0
    }
    .validate()
    .is_err());
}
