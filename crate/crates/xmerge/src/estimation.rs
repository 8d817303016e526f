//! Parameter estimation: invariant genes, rectification-based initialization,
//! gene means and variances, observation functions and noise variances.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ExpressionMatrix, StudySet};
use crate::spline::{self, CubicSpline, Lambda, SplineFit, SplineFitSpec, DEFAULT_MAX_KNOTS};

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;
pub const NOISE_FLOOR: f64 = 1e-8;
const RECTIFICATION_TOL: f64 = 1e-6;
const RECTIFICATION_MAX_ITERS: usize = 50;
const NOISE_IRLS_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantSetSpec {
    pub n_bins: usize,
    pub fraction: f64,
}

impl Default for InvariantSetSpec {
    fn default() -> Self {
        InvariantSetSpec {
            n_bins: 10,
            fraction: 0.10,
        }
    }
}

impl InvariantSetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(Error::Parameter(
                "invariant set needs at least 2 bins".into(),
            ));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Parameter(format!(
                "invariant fraction must lie in (0, 1], got {}",
                self.fraction
            )));
        }
        Ok(())
    }
}

/// Invariant gene indices, one sorted list per study.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSet {
    pub per_study: Vec<Vec<usize>>,
}

impl InvariantSet {
    pub fn select(data: &StudySet, spec: &InvariantSetSpec) -> Result<Self> {
        let per_study = data
            .studies()
            .iter()
            .map(|s| select_invariant_genes(&s.matrix, spec))
            .collect::<Result<_>>()?;
        Ok(InvariantSet { per_study })
    }
}

/// Per-row mean and unbiased sample variance.
pub(crate) fn row_moments(values: &Array2<f64>) -> Vec<(f64, f64)> {
    values
        .rows()
        .into_iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let ss: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum();
            (mean, if row.len() > 1 { ss / (n - 1.0) } else { 0.0 })
        })
        .collect()
}

/// `⌈fraction · size⌉`, robust to representation error in the product.
fn take_count(fraction: f64, size: usize) -> usize {
    let raw = fraction * size as f64;
    let rounded = raw.round();
    let count = if (raw - rounded).abs() < 1e-9 {
        rounded
    } else {
        raw.ceil()
    };
    (count as usize).min(size)
}

/// Low-variance genes spread over the expression range.
///
/// Gene means are binned into `n_bins` equal-width intervals; each bin keeps
/// its `⌈fraction · size⌉` genes of smallest sample variance across arrays,
/// ties going to the lower gene index.
pub fn select_invariant_genes(
    study: &ExpressionMatrix,
    spec: &InvariantSetSpec,
) -> Result<Vec<usize>> {
    spec.validate()?;
    if study.n_arrays() < 2 {
        return Err(Error::Parameter(
            "invariant selection needs at least 2 arrays".into(),
        ));
    }
    let moments = row_moments(study.values());
    let (lo, hi) = moments
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(m, _)| {
            (lo.min(m), hi.max(m))
        });
    let n_bins = if hi > lo { spec.n_bins } else { 1 };
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (g, &(m, _)) in moments.iter().enumerate() {
        let b = if n_bins == 1 {
            0
        } else {
            (((m - lo) / width).floor() as usize).min(n_bins - 1)
        };
        bins[b].push(g);
    }
    let mut chosen = Vec::new();
    for mut bin in bins {
        bin.sort_by(|&a, &b| moments[a].1.total_cmp(&moments[b].1).then(a.cmp(&b)));
        let take = take_count(spec.fraction, bin.len());
        chosen.extend_from_slice(&bin[..take]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Pooled average over all arrays of all studies.
pub fn estimate_means(x: &[Array2<f64>]) -> Vec<f64> {
    let Some(first) = x.first() else {
        return Vec::new();
    };
    let n_genes = first.nrows();
    let total: usize = x.iter().map(|m| m.ncols()).sum();
    (0..n_genes)
        .map(|g| {
            let s: f64 = x.iter().map(|m| m.row(g).sum()).sum();
            s / total as f64
        })
        .collect()
}

/// Pooled sample variance around `mu`, floored at `floor`.
pub fn estimate_gene_variances(x0: &[Array2<f64>], mu: &[f64], floor: f64) -> Result<Vec<f64>> {
    let total: usize = x0.iter().map(|m| m.ncols()).sum();
    if total < 2 {
        return Err(Error::Estimation(
            "gene variances need at least 2 arrays in total".into(),
        ));
    }
    Ok(mu
        .iter()
        .enumerate()
        .map(|(g, &m)| {
            let ss: f64 = x0
                .iter()
                .flat_map(|xk| xk.row(g).into_iter().map(move |v| (v - m) * (v - m)))
                .sum();
            (ss / (total - 1) as f64).max(floor)
        })
        .collect())
}

/// Output of the rectification step.
#[derive(Debug, Clone)]
pub struct Rectification {
    pub x0: Vec<Array2<f64>>,
    pub phis: Vec<CubicSpline>,
    /// Penalties actually used (GCV choices are resolved on the first pass).
    pub lambdas: Vec<f64>,
    pub iterations: usize,
    pub objective: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Study-balanced gene means: each study contributes its own per-gene mean.
fn balanced_means(x: &[Array2<f64>]) -> Vec<f64> {
    let k = x.len() as f64;
    let n_genes = x[0].nrows();
    (0..n_genes)
        .map(|g| {
            x.iter()
                .map(|m| m.row(g).sum() / m.ncols() as f64)
                .sum::<f64>()
                / k
        })
        .collect()
}

/// Alternating estimation of the gene means and the rectification
/// functions `φ_k`, starting from `φ_k = id`.
///
/// Each pass fits `φ_k` by regressing the gene means on the observed values
/// of study `k`, then recomputes the means from the rectified data. The
/// rectified data are affinely renormalized after each pass so that the gene
/// means keep the location and spread they had under the identity map; the
/// objective is otherwise minimized by collapsing every `φ_k` to a constant.
pub fn initialize_rectification(data: &StudySet, lambdas: &[Lambda]) -> Result<Rectification> {
    if lambdas.len() != data.n_studies() {
        return Err(Error::Parameter(format!(
            "{} penalties for {} studies",
            lambdas.len(),
            data.n_studies()
        )));
    }
    let observed = data.observed();
    let flat: Vec<Vec<f64>> = observed
        .iter()
        .map(|m| m.iter().copied().collect())
        .collect();
    let mut x = observed.clone();
    let mut mu = balanced_means(&x);
    let (ref_mean, ref_std) = mean_std(&mu);
    if !(ref_std > 0.0) {
        return Err(Error::Estimation(
            "gene means have no spread; nothing to rectify".into(),
        ));
    }
    let mut resolved: Vec<Option<f64>> = lambdas
        .iter()
        .map(|l| match l {
            Lambda::Fixed(v) => Some(*v),
            Lambda::Gcv => None,
        })
        .collect();
    let mut phis: Vec<CubicSpline> = observed
        .iter()
        .map(|m| {
            let (lo, hi) = m
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            CubicSpline::identity(lo, hi)
        })
        .collect();
    let mut objective = f64::INFINITY;
    let mut iterations = 0;

    for iter in 0..RECTIFICATION_MAX_ITERS {
        iterations = iter + 1;
        let fits: Vec<SplineFit> = observed
            .par_iter()
            .zip(flat.par_iter())
            .zip(resolved.par_iter())
            .map(|((yk, yflat), lambda)| {
                let n_arrays = yk.ncols();
                let target: Vec<f64> = (0..yk.nrows())
                    .flat_map(|g| std::iter::repeat_n(mu[g], n_arrays))
                    .collect();
                let weights = vec![1.0 / n_arrays as f64; yflat.len()];
                let spec = SplineFitSpec {
                    lambda: lambda.map_or(Lambda::Gcv, Lambda::Fixed),
                    weights: Some(weights),
                    max_knots: DEFAULT_MAX_KNOTS,
                };
                spline::fit(yflat, &target, &spec)
            })
            .collect::<Result<_>>()?;
        for (slot, fit) in resolved.iter_mut().zip(&fits) {
            slot.get_or_insert(fit.lambda);
        }
        let mut candidate: Vec<Array2<f64>> = observed
            .iter()
            .zip(&fits)
            .map(|(yk, fit)| yk.mapv(|v| fit.spline.eval(v)))
            .collect();
        let new_mu = balanced_means(&candidate);
        let (m, s) = mean_std(&new_mu);
        if !(s > 0.0) {
            return Err(Error::Estimation(
                "rectification collapsed to a constant".into(),
            ));
        }
        let scale = ref_std / s;
        let offset = ref_mean - scale * m;
        for xk in candidate.iter_mut() {
            xk.mapv_inplace(|v| offset + scale * v);
        }
        phis = fits
            .iter()
            .map(|f| f.spline.affine_image(offset, scale))
            .collect();
        mu = new_mu.iter().map(|v| offset + scale * v).collect();
        x = candidate;

        let fit_term: f64 = x
            .iter()
            .map(|xk| {
                let w = 1.0 / xk.ncols() as f64;
                w * xk
                    .indexed_iter()
                    .map(|((g, _), v)| (v - mu[g]) * (v - mu[g]))
                    .sum::<f64>()
            })
            .sum();
        let penalty: f64 = phis
            .iter()
            .zip(&resolved)
            .map(|(p, l)| l.unwrap_or(0.0) * p.curvature_energy())
            .sum();
        let new_objective = fit_term + penalty;
        let converged = objective.is_finite()
            && (objective - new_objective).abs()
                <= RECTIFICATION_TOL * objective.abs().max(f64::MIN_POSITIVE);
        objective = new_objective;
        if converged {
            break;
        }
    }
    Ok(Rectification {
        x0: x,
        phis,
        lambdas: resolved.into_iter().map(|l| l.unwrap_or(0.0)).collect(),
        iterations,
        objective,
    })
}

/// Reparametrizes the intrinsic scale of a rectification so that the
/// average over studies of the standardized observed gene means is the
/// identity.
///
/// The likelihood only determines the intrinsic scale up to a common monotone
/// map, and the rectification fixed point follows the study with the largest
/// noise. A monotone spline `h` is fitted from the gene means to the
/// study-averaged standardized observed means; `x0` and every `φ_k` are
/// replaced by `h ∘ φ_k`, resampled as a natural interpolant on the knots of
/// `φ_k`. A single study is returned unchanged.
pub fn balance_intrinsic_scale(data: &StudySet, rect: &Rectification) -> Result<Rectification> {
    if data.n_studies() == 1 {
        return Ok(rect.clone());
    }
    data.check_shape(&rect.x0)?;
    let observed = data.observed();
    let moments: Vec<(f64, f64)> = observed
        .iter()
        .map(|m| mean_std(&m.iter().copied().collect::<Vec<_>>()))
        .collect();
    let k = moments.len() as f64;
    let ref_mean = moments.iter().map(|m| m.0).sum::<f64>() / k;
    let ref_std = moments.iter().map(|m| m.1).sum::<f64>() / k;
    if moments.iter().any(|m| !(m.1 > 0.0)) {
        return Err(Error::Estimation("a study has no spread".into()));
    }
    let target: Vec<f64> = (0..data.n_genes())
        .map(|g| {
            observed
                .iter()
                .zip(&moments)
                .map(|(m, &(mk, sk))| {
                    ref_mean + ref_std * (m.row(g).sum() / m.ncols() as f64 - mk) / sk
                })
                .sum::<f64>()
                / k
        })
        .collect();
    let mu = balanced_means(&rect.x0);
    let h = spline::fit(&mu, &target, &SplineFitSpec::default())?.spline;
    let (lo, hi) = mu
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !h.is_increasing_on(lo, hi) {
        return Err(Error::Estimation(
            "intrinsic scale map is not increasing".into(),
        ));
    }
    let phis: Vec<CubicSpline> = rect
        .phis
        .iter()
        .map(|phi| {
            let knots = phi.knots().to_vec();
            let values: Vec<f64> = knots.iter().map(|&t| h.eval(phi.eval(t))).collect();
            CubicSpline::natural_interpolant(knots, &values)
        })
        .collect::<Result<_>>()?;
    let x0 = observed
        .iter()
        .zip(&phis)
        .map(|(y, phi)| y.mapv(|v| phi.eval(v)))
        .collect();
    Ok(Rectification {
        x0,
        phis,
        lambdas: rect.lambdas.clone(),
        iterations: rect.iterations,
        objective: rect.objective,
    })
}

/// Fits each study's observation function on its invariant genes:
/// `y` is regressed on `x` over every array of those genes.
pub fn estimate_observation_functions(
    data: &StudySet,
    x: &[Array2<f64>],
    invariant: &InvariantSet,
    lambdas: &[Lambda],
) -> Result<Vec<SplineFit>> {
    data.check_shape(x)?;
    if invariant.per_study.len() != data.n_studies() || lambdas.len() != data.n_studies() {
        return Err(Error::Parameter(
            "one invariant set and one penalty per study required".into(),
        ));
    }
    data.studies()
        .par_iter()
        .zip(x.par_iter())
        .zip(invariant.per_study.par_iter())
        .zip(lambdas.par_iter())
        .map(|(((study, xk), genes), lambda)| {
            if genes.is_empty() {
                return Err(Error::Estimation(format!(
                    "study '{}' has an empty invariant set",
                    study.id
                )));
            }
            let yk = study.matrix.values();
            let mut xs = Vec::with_capacity(genes.len() * yk.ncols());
            let mut ys = Vec::with_capacity(xs.capacity());
            for &g in genes {
                xs.extend(xk.row(g).iter().copied());
                ys.extend(yk.row(g).iter().copied());
            }
            let spec = SplineFitSpec {
                lambda: *lambda,
                ..Default::default()
            };
            spline::fit(&xs, &ys, &spec)
        })
        .collect()
}

/// Observation-noise variances.
///
/// With a single study the noise variance is the mean square of `y − f(x)`
/// on the invariant genes, with the spline's equivalent degrees of freedom
/// removed from the count (never below half of it).
///
/// With several studies the within-study sample variance of every gene is
/// modeled as `f_k'(x̄_g)² s_g + τ_k²`, a gene component shared between
/// studies plus a per-study noise term, and fitted by alternating
/// iteratively reweighted least squares started from `τ = 0`. All genes
/// enter the fit: their own variance is absorbed by `s_g`, and restricting it
/// to genes picked for low observed variance biases `τ` downward.
///
/// Returns `τ_k² + lambda_reg²`, floored at `1e-8`.
pub fn estimate_noise_variances(
    data: &StudySet,
    x: &[Array2<f64>],
    fits: &[SplineFit],
    invariant: &InvariantSet,
    lambda_reg: f64,
) -> Result<Vec<f64>> {
    data.check_shape(x)?;
    if fits.len() != data.n_studies() || invariant.per_study.len() != data.n_studies() {
        return Err(Error::Parameter(
            "one spline and one invariant set per study required".into(),
        ));
    }
    if !(lambda_reg >= 0.0) {
        return Err(Error::Parameter("lambda_reg must be nonnegative".into()));
    }
    for (s, genes) in data.studies().iter().zip(&invariant.per_study) {
        if genes.is_empty() {
            return Err(Error::Estimation(format!(
                "study '{}' has an empty invariant set",
                s.id
            )));
        }
    }
    let raw = if data.n_studies() == 1 {
        residual_noise(data, x, fits, invariant)
    } else {
        NoiseDecomposition::build(data, x, fits).solve()
    };
    Ok(raw
        .into_iter()
        .map(|t| (t + lambda_reg * lambda_reg).max(NOISE_FLOOR))
        .collect())
}

/// Residual mean square of each study on its invariant genes, with the
/// spline's equivalent degrees of freedom removed from the count.
fn residual_noise(
    data: &StudySet,
    x: &[Array2<f64>],
    fits: &[SplineFit],
    invariant: &InvariantSet,
) -> Vec<f64> {
    invariant
        .per_study
        .iter()
        .enumerate()
        .map(|(s, genes)| {
            let yk = data.studies()[s].matrix.values();
            let f = &fits[s].spline;
            let mut ss = 0.0;
            for &g in genes {
                for c in 0..yk.ncols() {
                    let r = yk[(g, c)] - f.eval(x[s][(g, c)]);
                    ss += r * r;
                }
            }
            let count = (genes.len() * yk.ncols()) as f64;
            ss / (count - fits[s].edf).max(count / 2.0)
        })
        .collect()
}

struct NoiseDecomposition {
    /// Within-study sample variances, `[gene][study]`.
    variance: Vec<Vec<f64>>,
    /// Squared observation-function slopes at the gene's mean, `[gene][study]`.
    slope2: Vec<Vec<f64>>,
    n_studies: usize,
}

impl NoiseDecomposition {
    fn build(data: &StudySet, x: &[Array2<f64>], fits: &[SplineFit]) -> Self {
        let k = data.n_studies();
        let mut variance = Vec::with_capacity(data.n_genes());
        let mut slope2 = Vec::with_capacity(data.n_genes());
        for g in 0..data.n_genes() {
            let mut v = Vec::with_capacity(k);
            let mut b = Vec::with_capacity(k);
            for s in 0..k {
                let row = data.studies()[s].matrix.values().row(g);
                let n = row.len() as f64;
                let mean = row.sum() / n;
                v.push(row.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0));
                let slope = fits[s].spline.deriv(x[s].row(g).sum() / n);
                b.push(slope * slope);
            }
            variance.push(v);
            slope2.push(b);
        }
        NoiseDecomposition {
            variance,
            slope2,
            n_studies: k,
        }
    }

    /// Per-gene components for fixed noise terms and weights.
    fn gene_components(&self, tau: &[f64], w: &[Vec<f64>]) -> Vec<f64> {
        (0..self.variance.len())
            .map(|g| {
                let (mut num, mut den) = (0.0, 0.0);
                for s in 0..self.n_studies {
                    let b = self.slope2[g][s];
                    num += w[g][s] * b * (self.variance[g][s] - tau[s]);
                    den += w[g][s] * b * b;
                }
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Weighted least squares for the noise terms with the gene components
    /// profiled out, restricted to the studies in `active`.
    fn profile_solve(&self, w: &[Vec<f64>], active: &[usize]) -> Vec<f64> {
        let k = self.n_studies;
        let na = active.len();
        let mut normal = DMatrix::<f64>::zeros(na, na);
        let mut rhs = DVector::<f64>::zeros(na);
        let mut row = vec![0.0; na];
        for g in 0..self.variance.len() {
            let den: f64 = (0..k).map(|s| w[g][s] * self.slope2[g][s].powi(2)).sum();
            let c: Vec<f64> = (0..k)
                .map(|s| {
                    if den > 0.0 {
                        w[g][s] * self.slope2[g][s] / den
                    } else {
                        0.0
                    }
                })
                .collect();
            let a: f64 = (0..k).map(|s| c[s] * self.variance[g][s]).sum();
            for s in 0..k {
                let b = self.slope2[g][s];
                let u = self.variance[g][s] - b * a;
                for (col, &j) in active.iter().enumerate() {
                    row[col] = b * c[j] - if j == s { 1.0 } else { 0.0 };
                }
                for p in 0..na {
                    rhs[p] -= w[g][s] * row[p] * u;
                    for q in 0..na {
                        normal[(p, q)] += w[g][s] * row[p] * row[q];
                    }
                }
            }
        }
        let eps = 1e-12 * normal.amax().max(f64::MIN_POSITIVE);
        let solution = normal
            .svd(true, true)
            .solve(&rhs, eps)
            .unwrap_or_else(|_| DVector::zeros(na));
        let mut tau = vec![0.0; k];
        for (col, &j) in active.iter().enumerate() {
            tau[j] = solution[col];
        }
        tau
    }

    /// Nonnegative noise terms for fixed weights, by dropping the most
    /// negative study until the solution is feasible.
    fn constrained_solve(&self, w: &[Vec<f64>]) -> Vec<f64> {
        let mut active: Vec<usize> = (0..self.n_studies).collect();
        loop {
            let tau = self.profile_solve(w, &active);
            let worst = active
                .iter()
                .copied()
                .filter(|&s| tau[s] < 0.0)
                .min_by(|&a, &b| tau[a].total_cmp(&tau[b]));
            match worst {
                Some(s) => {
                    active.retain(|&a| a != s);
                    if active.is_empty() {
                        return vec![0.0; self.n_studies];
                    }
                }
                None => return tau,
            }
        }
    }

    /// Iteratively reweighted fit. The weight of a (gene, study) variance is
    /// the inverse squared variance predicted from the median gene component,
    /// so that no weight depends on the gene's own sample variances.
    fn solve(&self) -> Vec<f64> {
        let k = self.n_studies;
        let n = self.variance.len();
        let mut w = vec![vec![1.0; k]; n];
        let mut tau = self.constrained_solve(&w);
        for _ in 0..NOISE_IRLS_ITERS {
            let mut sigma = self.gene_components(&tau, &w);
            sigma.sort_unstable_by(f64::total_cmp);
            let typical = sigma[n / 2].max(0.0);
            for g in 0..n {
                for s in 0..k {
                    let pred = (self.slope2[g][s] * typical + tau[s]).max(NOISE_FLOOR);
                    w[g][s] = 1.0 / (pred * pred);
                }
            }
            let next = self.constrained_solve(&w);
            let change = next
                .iter()
                .zip(&tau)
                .map(|(a, b)| (a - b).abs() / b.abs().max(NOISE_FLOOR))
                .fold(0.0, f64::max);
            tau = next;
            if change < 1e-10 {
                break;
            }
        }
        tau
    }
}
