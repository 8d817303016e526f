use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xmerge::model::{posterior, ExpressionMatrix, GeneModel, Study, StudyModel, StudySet};
use xmerge::spline::CubicSpline;

struct Instance {
    x: Vec<Array2<f64>>,
    y: StudySet,
    genes: GeneModel,
    studies: Vec<StudyModel>,
    lambdas: Vec<f64>,
}

fn spline(rng: &mut ChaCha8Rng) -> CubicSpline {
    let knots: Vec<f64> = (0..5).map(|i| -2.0 + i as f64).collect();
    let values: Vec<f64> = knots
        .iter()
        .map(|&t| t + 0.3 * rng.random_range(-1.0..1.0))
        .collect();
    CubicSpline::natural_interpolant(knots, &values).unwrap()
}

fn instance(seed: u64, n_genes: usize, arrays: &[usize]) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genes: Vec<String> = (0..n_genes).map(|g| format!("g{g}")).collect();
    let mut studies = Vec::new();
    let mut x = Vec::new();
    let mut models = Vec::new();
    for (k, &n) in arrays.iter().enumerate() {
        let arr: Vec<String> = (0..n).map(|c| format!("s{k}a{c}")).collect();
        let yv = Array2::from_shape_fn((n_genes, n), |_| rng.random_range(-2.0..2.0));
        x.push(Array2::from_shape_fn((n_genes, n), |_| {
            rng.random_range(-2.0..2.0)
        }));
        studies.push(Study::unlabeled(
            format!("s{k}"),
            ExpressionMatrix::new(genes.clone(), arr, yv).unwrap(),
        ));
        models.push(StudyModel {
            tau2: rng.random_range(0.1..2.0),
            spline: spline(&mut rng),
            lambda_reg: 0.0,
            lambda: 1.0,
        });
    }
    let mu = (0..n_genes).map(|_| rng.random_range(-1.0..1.0)).collect();
    let sigma2 = (0..n_genes).map(|_| rng.random_range(0.2..3.0)).collect();
    Instance {
        x,
        y: StudySet::new(studies).unwrap(),
        genes: GeneModel::new(mu, sigma2).unwrap(),
        studies: models,
        lambdas: arrays.iter().map(|_| rng.random_range(0.0..2.0)).collect(),
    }
}

/// Triple loop over studies, genes and arrays.
fn oracle(inst: &Instance) -> (f64, f64, f64) {
    let (mut l1, mut l2, mut l3) = (0.0, 0.0, 0.0);
    for (k, study) in inst.y.studies().iter().enumerate() {
        let y = study.matrix.values();
        let m = &inst.studies[k];
        for g in 0..y.nrows() {
            for c in 0..y.ncols() {
                let xv = inst.x[k][(g, c)];
                let r = y[(g, c)] - m.spline.eval(xv);
                l1 -= r * r / (2.0 * m.tau2);
                let d = xv - inst.genes.mu[g];
                l2 -= d * d / (2.0 * inst.genes.sigma2[g]);
            }
        }
        // ∫ s''² piecewise: s'' = 2c + 6d u is linear on each interval
        let mut energy = 0.0;
        for (j, p) in m.spline.pieces().iter().enumerate() {
            let h = m.spline.knots()[j + 1] - m.spline.knots()[j];
            let (a, b) = (2.0 * p[2], 2.0 * p[2] + 6.0 * p[3] * h);
            energy += h * (a * a + a * b + b * b) / 3.0;
        }
        l3 -= inst.lambdas[k] * energy;
    }
    (l1, l2, l3)
}

#[test]
fn small_instance_matches_summation_oracle() {
    for seed in 0..10 {
        let inst = instance(seed, 3, &[2, 2]);
        let p = posterior(&inst.x, &inst.y, &inst.genes, &inst.studies, &inst.lambdas).unwrap();
        let (l1, l2, l3) = oracle(&inst);
        assert!((p.l1 - l1).abs() < 1e-12);
        assert!((p.l2 - l2).abs() < 1e-12);
        assert!((p.l3 - l3).abs() < 1e-12);
        assert!((p.total - (l1 + l2 + l3)).abs() < 1e-12);
    }
}

#[test]
fn exact_fit_has_zero_posterior() {
    let genes = vec!["a".to_string(), "b".to_string()];
    let line = CubicSpline::natural_interpolant(vec![-5.0, 5.0], &[-9.0, 11.0]).unwrap();
    let mu = [0.5, -1.0];
    let x = Array2::from_shape_fn((2, 3), |(g, _)| mu[g]);
    let y = x.mapv(|v| 2.0 * v + 1.0);
    let set = StudySet::new(vec![Study::unlabeled(
        "s",
        ExpressionMatrix::new(genes, vec!["c0".into(), "c1".into(), "c2".into()], y).unwrap(),
    )])
    .unwrap();
    let study = StudyModel {
        tau2: 0.3,
        spline: line,
        lambda_reg: 0.0,
        lambda: 1.0,
    };
    let p = posterior(
        &[x],
        &set,
        &GeneModel::new(mu.to_vec(), vec![1.0, 2.0]).unwrap(),
        &[study],
        &[5.0],
    )
    .unwrap();
    assert!(p.total.abs() < 1e-12);
}

#[test]
fn single_entry_substitution() {
    let set = StudySet::new(vec![Study::unlabeled(
        "s",
        ExpressionMatrix::new(
            vec!["g".into()],
            vec!["c".into(), "d".into()],
            Array2::from_shape_vec((1, 2), vec![1.0, 0.0]).unwrap(),
        )
        .unwrap(),
    )])
    .unwrap();
    let study = StudyModel {
        tau2: 1.0,
        spline: CubicSpline::identity(-1.0, 1.0),
        lambda_reg: 0.0,
        lambda: 1.0,
    };
    let p = posterior(
        &[Array2::zeros((1, 2))],
        &set,
        &GeneModel::new(vec![0.0], vec![1.0]).unwrap(),
        &[study],
        &[0.0],
    )
    .unwrap();
    assert_eq!((p.l1, p.l2, p.total), (-0.5, 0.0, -0.5));
}

fn permuted(inst: &Instance, perm: &[usize]) -> Instance {
    let genes: Vec<String> = perm.iter().map(|&g| inst.y.gene_ids()[g].clone()).collect();
    let rows = |m: &Array2<f64>| Array2::from_shape_fn(m.dim(), |(g, c)| m[(perm[g], c)]);
    let studies = inst
        .y
        .studies()
        .iter()
        .map(|s| {
            let m = ExpressionMatrix::new(
                genes.clone(),
                s.matrix.array_ids().to_vec(),
                rows(s.matrix.values()),
            )
            .unwrap();
            Study::unlabeled(s.id.clone(), m)
        })
        .collect();
    Instance {
        x: inst.x.iter().map(rows).collect(),
        y: StudySet::new(studies).unwrap(),
        genes: GeneModel::new(
            perm.iter().map(|&g| inst.genes.mu[g]).collect(),
            perm.iter().map(|&g| inst.genes.sigma2[g]).collect(),
        )
        .unwrap(),
        studies: inst.studies.clone(),
        lambdas: inst.lambdas.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn total_is_invariant_under_gene_permutation(seed in 0u64..10_000, perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let inst = instance(seed, 6, &[3, 2]);
        let a = posterior(&inst.x, &inst.y, &inst.genes, &inst.studies, &inst.lambdas).unwrap();
        let p = permuted(&inst, &perm);
        let b = posterior(&p.x, &p.y, &p.genes, &p.studies, &p.lambdas).unwrap();
        prop_assert!((a.total - b.total).abs() <= 1e-10 * a.total.abs().max(1.0));
    }

    #[test]
    fn larger_residual_lowers_l1(seed in 0u64..10_000, g in 0usize..4, c in 0usize..3, bump in 0.01f64..3.0) {
        let inst = instance(seed, 4, &[3]);
        let a = posterior(&inst.x, &inst.y, &inst.genes, &inst.studies, &inst.lambdas).unwrap();
        let study = &inst.y.studies()[0];
        let mut y = study.matrix.values().clone();
        let r = y[(g, c)] - inst.studies[0].spline.eval(inst.x[0][(g, c)]);
        y[(g, c)] += bump * if r >= 0.0 { 1.0 } else { -1.0 };
        let set = StudySet::new(vec![Study::unlabeled("s0", study.matrix.with_values(y).unwrap())]).unwrap();
        let b = posterior(&inst.x, &set, &inst.genes, &inst.studies, &inst.lambdas).unwrap();
        prop_assert!(b.l1 < a.l1);
    }

    #[test]
    fn affine_splines_have_no_curvature_term(seed in 0u64..10_000, slope in 0.1f64..3.0) {
        let mut inst = instance(seed, 3, &[2, 2]);
        for s in &mut inst.studies {
            s.spline = CubicSpline::natural_interpolant(vec![-3.0, 0.0, 3.0], &[-3.0 * slope, 0.0, 3.0 * slope]).unwrap();
        }
        let p = posterior(&inst.x, &inst.y, &inst.genes, &inst.studies, &inst.lambdas).unwrap();
        prop_assert!(p.l3.abs() < 1e-12);
    }
}
