//! Semi-artificial distortion experiments.
//!
//! A single expression matrix is split into two label-balanced subsets, each
//! subset is standardized, shifted onto a positive domain, passed through a
//! power law and corrupted with Gaussian noise whose scale follows
//! `τ_k = m_k α std(f_k(x_k)) / 10`. The undistorted values are kept as ground
//! truth.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::ExpressionMatrix;

/// Name of the pseudo-random generator, recorded in simulation metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64, one stream per use)";

/// Smallest value after the positive-domain shift.
pub const DOMAIN_SHIFT: f64 = 0.1;

const SPLIT_STREAM: u64 = 0;
const SYNTHETIC_STREAM: u64 = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionSpec {
    pub power_exponents: Vec<f64>,
    pub noise_tune: f64,
    pub noise_multipliers: Vec<f64>,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for DistortionSpec {
    fn default() -> Self {
        DistortionSpec {
            power_exponents: vec![0.7, 1.4],
            noise_tune: 1.0,
            noise_multipliers: vec![1.0, 3.0],
            seed: 0,
            standardize: true,
        }
    }
}

impl DistortionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.power_exponents.is_empty() {
            return Err(Error::Parameter(
                "at least one power exponent is required".into(),
            ));
        }
        if self.power_exponents.len() != self.noise_multipliers.len() {
            return Err(Error::Parameter(format!(
                "{} exponents but {} noise multipliers",
                self.power_exponents.len(),
                self.noise_multipliers.len()
            )));
        }
        if self
            .power_exponents
            .iter()
            .any(|&p| !(p > 0.0 && p.is_finite()))
        {
            return Err(Error::Parameter("power exponents must be positive".into()));
        }
        if self
            .noise_multipliers
            .iter()
            .any(|&m| !(m > 0.0 && m.is_finite()))
        {
            return Err(Error::Parameter(
                "noise multipliers must be positive".into(),
            ));
        }
        if !(self.noise_tune >= 0.0 && self.noise_tune.is_finite()) {
            return Err(Error::Parameter("noise_tune must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn n_studies(&self) -> usize {
        self.power_exponents.len()
    }

    /// Key-value description of the design, in a stable order.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        vec![
            ("rng".into(), RNG_ALGORITHM.into()),
            ("seed".into(), self.seed.to_string()),
            ("power_exponents".into(), join(&self.power_exponents)),
            ("noise_multipliers".into(), join(&self.noise_multipliers)),
            ("noise_tune".into(), format!("{}", self.noise_tune)),
            (
                "standardization".into(),
                if self.standardize { "global" } else { "none" }.into(),
            ),
            ("domain_shift_min".into(), format!("{DOMAIN_SHIFT}")),
        ]
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two label-balanced subsets of the arrays of one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub first: ExpressionMatrix,
    pub second: ExpressionMatrix,
    pub first_labels: Vec<String>,
    pub second_labels: Vec<String>,
    /// Original column indices, increasing.
    pub first_columns: Vec<usize>,
    pub second_columns: Vec<usize>,
}

/// Seeded split giving each label class's arrays evenly to the two subsets;
/// an odd class gives its extra array to the second subset.
pub fn split_balanced(data: &ExpressionMatrix, labels: &[String], seed: u64) -> Result<Split> {
    if labels.len() != data.n_arrays() {
        return Err(Error::Shape(format!(
            "{} labels for {} arrays",
            labels.len(),
            data.n_arrays()
        )));
    }
    let mut classes: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(l.as_str()).or_default().push(i);
    }
    let mut rng = rng_for(seed, SPLIT_STREAM);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (label, mut cols) in classes {
        if cols.len() < 2 {
            return Err(Error::Split(format!(
                "label class '{label}' has {} array(s); at least 2 are needed",
                cols.len()
            )));
        }
        cols.shuffle(&mut rng);
        let half = cols.len() / 2;
        first.extend_from_slice(&cols[..half]);
        second.extend_from_slice(&cols[half..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    let pick = |cols: &[usize]| cols.iter().map(|&c| labels[c].clone()).collect::<Vec<_>>();
    Ok(Split {
        first: data.select_arrays(&first)?,
        second: data.select_arrays(&second)?,
        first_labels: pick(&first),
        second_labels: pick(&second),
        first_columns: first,
        second_columns: second,
    })
}

fn global_mean_std(values: &Array2<f64>) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distorted {
    pub distorted: ExpressionMatrix,
    /// Standardized, shifted values that the power law was applied to.
    pub truth: ExpressionMatrix,
    pub tau2_true: f64,
    pub exponent: f64,
}

/// Distorts one subset with the exponent and noise multiplier of study
/// `study` in `spec`. Each study draws noise from its own stream of the seed.
pub fn apply_distortion(
    data: &ExpressionMatrix,
    study: usize,
    spec: &DistortionSpec,
) -> Result<Distorted> {
    spec.validate()?;
    if study >= spec.n_studies() {
        return Err(Error::Parameter(format!(
            "study index {study} out of range for {} distortions",
            spec.n_studies()
        )));
    }
    let exponent = spec.power_exponents[study];
    let multiplier = spec.noise_multipliers[study];
    let mut truth = data.values().clone();
    if spec.standardize {
        let (mean, std) = global_mean_std(&truth);
        let std = if std > 0.0 { std } else { 1.0 };
        truth.mapv_inplace(|v| (v - mean) / std);
    }
    let min = truth.iter().cloned().fold(f64::INFINITY, f64::min);
    truth.mapv_inplace(|v| v - min + DOMAIN_SHIFT);

    let mut distorted = truth.mapv(|v| v.powf(exponent));
    let (_, std_f) = global_mean_std(&distorted);
    let tau = multiplier * spec.noise_tune * std_f / 10.0;
    let tau2_true = tau * tau;
    if tau > 0.0 {
        let normal = Normal::new(0.0, tau).map_err(|e| Error::Parameter(e.to_string()))?;
        let mut rng = rng_for(spec.seed, study as u64 + 1);
        for v in distorted.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(Distorted {
        distorted: data.with_values(distorted)?,
        truth: data.with_values(truth)?,
        tau2_true,
        exponent,
    })
}

/// Design of a synthetic base matrix standing in for a real two-condition
/// experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDesign {
    pub n_genes: usize,
    /// Label and number of arrays of each condition.
    pub conditions: Vec<(String, usize)>,
    pub n_differential: usize,
    /// Shift of differential genes between the first two conditions, in units
    /// of the gene's standard deviation; drawn uniformly from this range.
    pub effect_range: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticDesign {
    fn default() -> Self {
        SyntheticDesign {
            n_genes: 2000,
            conditions: vec![("aerobic".into(), 20), ("anaerobic".into(), 22)],
            n_differential: 100,
            effect_range: (1.0, 2.5),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub matrix: ExpressionMatrix,
    pub labels: Vec<String>,
    /// Genes shifted between the first two conditions, increasing.
    pub differential: Vec<usize>,
    /// Sign of the first-minus-second condition shift for each entry of
    /// `differential`.
    pub directions: Vec<i8>,
}

/// Log-scale expression matrix with gene means spread over a few units,
/// log-normal gene standard deviations and a block of differential genes.
pub fn synthetic_dataset(design: &SyntheticDesign) -> Result<SyntheticData> {
    if design.conditions.len() < 2 {
        return Err(Error::Parameter(
            "at least two conditions are required".into(),
        ));
    }
    if design.n_differential > design.n_genes {
        return Err(Error::Parameter(
            "more differential genes than genes".into(),
        ));
    }
    let (lo, hi) = design.effect_range;
    if !(lo >= 0.0 && hi >= lo) {
        return Err(Error::Parameter("invalid effect range".into()));
    }
    let mut rng = rng_for(design.seed, SYNTHETIC_STREAM);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let labels: Vec<String> = design
        .conditions
        .iter()
        .flat_map(|(l, n)| std::iter::repeat_n(l.clone(), *n))
        .collect();
    let n_arrays = labels.len();
    let mut genes: Vec<usize> = (0..design.n_genes).collect();
    genes.shuffle(&mut rng);
    let mut differential: Vec<usize> = genes[..design.n_differential].to_vec();
    differential.sort_unstable();

    let mut values = Array2::zeros((design.n_genes, n_arrays));
    let mut directions = Vec::with_capacity(differential.len());
    for g in 0..design.n_genes {
        let mean = 8.0 + 1.5 * std_normal.sample(&mut rng);
        let sd = (0.3f64.ln() + 0.35 * std_normal.sample(&mut rng)).exp();
        let shift = if differential.binary_search(&g).is_ok() {
            let size = rng.random_range(lo..=hi) * sd;
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            directions.push(sign as i8);
            sign * size
        } else {
            0.0
        };
        for (c, label) in labels.iter().enumerate() {
            let offset = if *label == design.conditions[0].0 {
                shift / 2.0
            } else if *label == design.conditions[1].0 {
                -shift / 2.0
            } else {
                0.0
            };
            values[(g, c)] = mean + offset + sd * std_normal.sample(&mut rng);
        }
    }
    let gene_ids = (0..design.n_genes).map(|g| format!("gene{g:05}")).collect();
    let array_ids = (0..n_arrays).map(|c| format!("array{c:03}")).collect();
    Ok(SyntheticData {
        matrix: ExpressionMatrix::new(gene_ids, array_ids, values)?,
        labels,
        differential,
        directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn matrix(values: Array2<f64>) -> ExpressionMatrix {
        let g = (0..values.nrows()).map(|i| format!("g{i}")).collect();
        let a = (0..values.ncols()).map(|i| format!("a{i}")).collect();
        ExpressionMatrix::new(g, a, values).unwrap()
    }

    fn labels(counts: &[(&str, usize)]) -> Vec<String> {
        counts
            .iter()
            .flat_map(|(l, n)| std::iter::repeat_n(l.to_string(), *n))
            .collect()
    }

    #[test]
    fn split_sizes_ten_and_eleven() {
        let m = matrix(Array2::zeros((3, 42)));
        let l = labels(&[("aerobic", 20), ("anaerobic", 22)]);
        let s = split_balanced(&m, &l, 7).unwrap();
        let count = |ls: &[String], c: &str| ls.iter().filter(|x| *x == c).count();
        assert_eq!(count(&s.first_labels, "aerobic"), 10);
        assert_eq!(count(&s.first_labels, "anaerobic"), 11);
        assert_eq!(count(&s.second_labels, "aerobic"), 10);
        assert_eq!(count(&s.second_labels, "anaerobic"), 11);
        let mut all: Vec<usize> = s
            .first_columns
            .iter()
            .chain(&s.second_columns)
            .cloned()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..42).collect::<Vec<_>>());
    }

    #[test]
    fn odd_class_extra_goes_second() {
        let m = matrix(Array2::zeros((1, 5)));
        let l = labels(&[("a", 2), ("b", 3)]);
        let s = split_balanced(&m, &l, 1).unwrap();
        assert_eq!(s.first.n_arrays(), 2);
        assert_eq!(s.second.n_arrays(), 3);
    }

    #[test]
    fn minimal_split() {
        let m = matrix(Array2::zeros((1, 4)));
        let s = split_balanced(&m, &labels(&[("a", 2), ("b", 2)]), 3).unwrap();
        assert_eq!(s.first_labels.len(), 2);
        assert_eq!(s.second_labels.len(), 2);
        assert_ne!(s.first_labels[0], s.first_labels[1]);
    }

    #[test]
    fn singleton_class_rejected() {
        let m = matrix(Array2::zeros((1, 3)));
        let err = split_balanced(&m, &labels(&[("a", 2), ("b", 1)]), 0).unwrap_err();
        assert!(matches!(err, Error::Split(_)));
    }

    #[test]
    fn split_seed_contract() {
        let m = matrix(Array2::zeros((1, 42)));
        let l = labels(&[("a", 20), ("b", 22)]);
        let base = split_balanced(&m, &l, 0).unwrap();
        assert_eq!(base, split_balanced(&m, &l, 0).unwrap());
        let differing = (1..=10)
            .filter(|&s| split_balanced(&m, &l, s).unwrap().first_columns != base.first_columns)
            .count();
        assert_eq!(differing, 10);
    }

    #[test]
    fn identity_without_noise() {
        let m = matrix(array![[1.0, 5.0, 2.0], [3.0, -1.0, 0.5]]);
        let spec = DistortionSpec {
            power_exponents: vec![1.0],
            noise_multipliers: vec![1.0],
            noise_tune: 0.0,
            ..Default::default()
        };
        let d = apply_distortion(&m, 0, &spec).unwrap();
        assert_eq!(d.tau2_true, 0.0);
        assert_eq!(d.distorted.values(), d.truth.values());
        let min = d
            .truth
            .values()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!((min - DOMAIN_SHIFT).abs() < 1e-15);
        let (_, std) = global_mean_std(d.truth.values());
        assert!((std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_specs_rejected() {
        let m = matrix(array![[1.0, 2.0]]);
        let mut spec = DistortionSpec::default();
        spec.power_exponents[0] = 0.0;
        assert!(apply_distortion(&m, 0, &spec).is_err());
        let spec = DistortionSpec {
            noise_multipliers: vec![1.0],
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        assert!(apply_distortion(&m, 2, &DistortionSpec::default()).is_err());
    }

    #[test]
    fn synthetic_design_shape() {
        let d = synthetic_dataset(&SyntheticDesign {
            n_genes: 300,
            n_differential: 30,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(d.matrix.n_genes(), 300);
        assert_eq!(d.matrix.n_arrays(), 42);
        assert_eq!(d.differential.len(), 30);
        assert_eq!(d.directions.len(), 30);
        assert!(d.differential.windows(2).all(|w| w[0] < w[1]));
    }
}
