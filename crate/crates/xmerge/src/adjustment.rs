//! MAP adjustment of the intrinsic expression values and the full merging
//! pipeline.
//!
//! For fixed means, variances and observation functions the objective splits
//! into one term per gene,
//!
//! ```text
//! Φ_g(x_g) = Σ_{k,c} (y − f_k(x))² / 2τ_k² + (x − μ_g)² / 2σ_g²
//! ```
//!
//! which is minimized by the linearized update
//! `x ← α μ_g + (1 − α) [x + (y − f_k(x)) / f_k'(x)]` with
//! `α = 1 / (1 + f_k'(x)² σ_g² / τ_k²)`. The update is a gradient step of size
//! `σ_g² α`, which [`gradient_check`] verifies numerically.

use log::{debug, warn};
use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{
    balance_intrinsic_scale, estimate_gene_variances, estimate_means, estimate_noise_variances,
    estimate_observation_functions, initialize_rectification, InvariantSet, InvariantSetSpec,
    Rectification, DEFAULT_VARIANCE_FLOOR,
};
use crate::model::{posterior, GeneModel, PosteriorValue, StudyModel, StudySet};
use crate::spline::{CubicSpline, Lambda};

const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentConfig {
    pub max_outer_iters: usize,
    /// Update sweeps per gene between mean updates; 1 interleaves single
    /// steps with the mean update.
    pub max_inner_iters: usize,
    pub rel_tol: f64,
    pub deriv_floor: f64,
    pub damping: bool,
    /// Refit observation functions and noise variances after every outer
    /// iteration instead of keeping the initial estimates.
    pub refit_each_outer: bool,
    pub variance_floor: f64,
    /// Reparametrize the rectified scale so that the average standardized
    /// observation function is the identity.
    pub balance_scale: bool,
}

impl Default for AdjustmentConfig {
    fn default() -> Self {
        AdjustmentConfig {
            max_outer_iters: 30,
            max_inner_iters: 20,
            rel_tol: 1e-5,
            deriv_floor: 1e-3,
            damping: true,
            refit_each_outer: false,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            balance_scale: true,
        }
    }
}

impl AdjustmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::Parameter("iteration limits must be positive".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Parameter("rel_tol must lie in (0, 1)".into()));
        }
        if !(self.deriv_floor > 0.0) || !(self.variance_floor > 0.0) {
            return Err(Error::Parameter("floors must be positive".into()));
        }
        Ok(())
    }
}

/// Shrinkage weight toward the gene mean, `1 / (1 + f'² σ² / τ²)`.
#[inline]
pub fn alpha_weight(fprime: f64, sigma2: f64, tau2: f64) -> f64 {
    let signal = fprime * fprime * sigma2;
    let a = tau2 / (tau2 + signal);
    if a.is_nan() {
        // both terms overflowed or vanished
        if signal > 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        a
    }
}

/// Sign-preserving slope clamp; zero maps to `+floor`.
#[inline]
pub fn clamp_slope(fprime: f64, floor: f64) -> f64 {
    if fprime.abs() >= floor {
        fprime
    } else if fprime < 0.0 {
        -floor
    } else {
        floor
    }
}

/// Observed data and parameters for one gene.
#[derive(Debug, Clone, Copy)]
pub struct GeneContext<'a> {
    /// Observed values, one row per study.
    pub y: &'a [&'a [f64]],
    pub mu: f64,
    pub sigma2: f64,
    pub studies: &'a [StudyModel],
}

impl GeneContext<'_> {
    pub fn objective(&self, x: &[Vec<f64>]) -> f64 {
        let mut phi = 0.0;
        for ((xk, yk), model) in x.iter().zip(self.y).zip(self.studies) {
            for (&xv, &yv) in xk.iter().zip(yk.iter()) {
                let r = yv - model.spline.eval(xv);
                let d = xv - self.mu;
                phi += r * r / (2.0 * model.tau2) + d * d / (2.0 * self.sigma2);
            }
        }
        phi
    }

    /// Undamped linearized update of every entry.
    pub fn proposal(&self, x: &[Vec<f64>], deriv_floor: f64) -> Vec<Vec<f64>> {
        x.iter()
            .zip(self.y)
            .zip(self.studies)
            .map(|((xk, yk), model)| {
                xk.iter()
                    .zip(yk.iter())
                    .map(|(&xv, &yv)| {
                        let (fv, fp) = model.spline.eval_with_deriv(xv);
                        let fp = clamp_slope(fp, deriv_floor);
                        let a = alpha_weight(fp, self.sigma2, model.tau2);
                        a * self.mu + (1.0 - a) * (xv + (yv - fv) / fp)
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneUpdate {
    pub x: Vec<Vec<f64>>,
    pub objective_before: f64,
    pub objective_after: f64,
    /// Number of step halvings applied (0 for a full step).
    pub halvings: usize,
    /// False when no damped step decreased the objective and the previous
    /// values were kept.
    pub accepted: bool,
}

/// One update of a gene's entries, with backtracking when `damping` is on.
pub fn update_gene(
    x_prev: &[Vec<f64>],
    ctx: &GeneContext<'_>,
    config: &AdjustmentConfig,
) -> GeneUpdate {
    let full = ctx.proposal(x_prev, config.deriv_floor);
    if !config.damping {
        let before = ctx.objective(x_prev);
        let after = ctx.objective(&full);
        return GeneUpdate {
            x: full,
            objective_before: before,
            objective_after: after,
            halvings: 0,
            accepted: true,
        };
    }
    let before = ctx.objective(x_prev);
    let mut step = 1.0;
    for halvings in 0..=MAX_HALVINGS {
        let candidate: Vec<Vec<f64>> = x_prev
            .iter()
            .zip(&full)
            .map(|(xk, pk)| {
                xk.iter()
                    .zip(pk)
                    .map(|(&a, &b)| a + step * (b - a))
                    .collect()
            })
            .collect();
        let after = ctx.objective(&candidate);
        if after <= before {
            return GeneUpdate {
                x: candidate,
                objective_before: before,
                objective_after: after,
                halvings,
                accepted: true,
            };
        }
        step *= 0.5;
    }
    debug!("no damped step decreased the gene objective; keeping previous values");
    GeneUpdate {
        x: x_prev.to_vec(),
        objective_before: before,
        objective_after: before,
        halvings: MAX_HALVINGS,
        accepted: false,
    }
}

/// A single-entry configuration for [`gradient_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradientProbe<'a> {
    pub spline: &'a CubicSpline,
    pub x: f64,
    pub y: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub tau2: f64,
}

impl GradientProbe<'_> {
    fn objective(&self, x: f64) -> f64 {
        let r = self.y - self.spline.eval(x);
        let d = x - self.mu;
        r * r / (2.0 * self.tau2) + d * d / (2.0 * self.sigma2)
    }

    /// Analytic `∂Φ/∂x` and the scale of its two terms.
    fn gradient(&self) -> (f64, f64) {
        let (fv, fp) = self.spline.eval_with_deriv(self.x);
        let fit = -(self.y - fv) * fp / self.tau2;
        let prior = (self.x - self.mu) / self.sigma2;
        (fit + prior, fit.abs() + prior.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientViolation {
    pub index: usize,
    pub step: f64,
    pub scaled_gradient: f64,
    pub analytic: f64,
    pub finite_difference: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientReport {
    pub checked: usize,
    /// Probes whose slope fell below the clamp and were skipped.
    pub clamped: Vec<usize>,
    pub violations: Vec<GradientViolation>,
    pub max_step_error: f64,
    pub max_fd_error: f64,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the undamped step equals `−σ² α ∇Φ` (relative `step_tol`) and
/// that the analytic gradient agrees with central differences at `h = 1e-6`
/// (relative `fd_tol`).
pub fn gradient_check(
    probes: &[GradientProbe<'_>],
    deriv_floor: f64,
    step_tol: f64,
    fd_tol: f64,
) -> GradientReport {
    let mut report = GradientReport::default();
    let h = 1e-6;
    for (i, p) in probes.iter().enumerate() {
        let (fv, fp) = p.spline.eval_with_deriv(p.x);
        if fp.abs() < deriv_floor {
            report.clamped.push(i);
            continue;
        }
        report.checked += 1;
        let a = alpha_weight(fp, p.sigma2, p.tau2);
        let step = a * (p.mu - p.x) + (1.0 - a) * (p.y - fv) / fp;
        let (grad, scale) = p.gradient();
        let scaled = -p.sigma2 * a * grad;
        let step_scale = (p.sigma2 * a * scale).max(f64::MIN_POSITIVE);
        let step_err = (step - scaled).abs() / step_scale;
        let fd = (p.objective(p.x + h) - p.objective(p.x - h)) / (2.0 * h);
        let fd_err = (fd - grad).abs() / scale.max(f64::MIN_POSITIVE);
        report.max_step_error = report.max_step_error.max(step_err);
        report.max_fd_error = report.max_fd_error.max(fd_err);
        if step_err > step_tol || fd_err > fd_tol {
            report.violations.push(GradientViolation {
                index: i,
                step,
                scaled_gradient: scaled,
                analytic: grad,
                finite_difference: fd,
            });
        }
    }
    report
}

/// Outcome of one parallel pass over all genes.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub x: Vec<Array2<f64>>,
    /// Per-gene objective after the pass.
    pub objective: Vec<f64>,
    /// Genes whose objective increased during an inner iteration.
    pub monotone_violations: usize,
    pub rejected_steps: usize,
}

/// Runs up to `max_inner_iters` updates on every gene, in parallel across
/// genes. Genes stop early once their objective stops moving.
pub fn sweep(
    data: &StudySet,
    x: &[Array2<f64>],
    genes: &GeneModel,
    studies: &[StudyModel],
    config: &AdjustmentConfig,
) -> Result<Sweep> {
    data.check_shape(x)?;
    if genes.len() != data.n_genes() || studies.len() != data.n_studies() {
        return Err(Error::Shape(
            "gene or study model does not match the data".into(),
        ));
    }
    let observed: Vec<&Array2<f64>> = data.studies().iter().map(|s| s.matrix.values()).collect();
    let results: Vec<(Vec<Vec<f64>>, f64, bool, usize)> = (0..data.n_genes())
        .into_par_iter()
        .map(|g| {
            let rows: Vec<Vec<f64>> = observed.iter().map(|m| m.row(g).to_vec()).collect();
            let row_refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let ctx = GeneContext {
                y: &row_refs,
                mu: genes.mu[g],
                sigma2: genes.sigma2[g],
                studies,
            };
            let mut current: Vec<Vec<f64>> = x.iter().map(|m| m.row(g).to_vec()).collect();
            let mut phi = ctx.objective(&current);
            let mut increased = false;
            let mut rejected = 0;
            for _ in 0..config.max_inner_iters {
                let upd = update_gene(&current, &ctx, config);
                if upd.objective_after > upd.objective_before {
                    increased = true;
                }
                if !upd.accepted {
                    rejected += 1;
                    break;
                }
                let change = phi - upd.objective_after;
                current = upd.x;
                let done = change.abs() <= 1e-12 * phi.abs().max(1e-300);
                phi = upd.objective_after;
                if done {
                    break;
                }
            }
            (current, phi, increased, rejected)
        })
        .collect();

    let mut out: Vec<Array2<f64>> = x.to_vec();
    let mut objective = Vec::with_capacity(results.len());
    let mut violations = 0;
    let mut rejected = 0;
    for (g, (rows, phi, increased, rej)) in results.into_iter().enumerate() {
        for (k, row) in rows.into_iter().enumerate() {
            for (c, v) in row.into_iter().enumerate() {
                out[k][(g, c)] = v;
            }
        }
        objective.push(phi);
        violations += increased as usize;
        rejected += rej;
    }
    Ok(Sweep {
        x: out,
        objective,
        monotone_violations: violations,
        rejected_steps: rejected,
    })
}

/// Sum of all per-gene objectives, accumulated in gene order.
pub fn data_objective(
    data: &StudySet,
    x: &[Array2<f64>],
    genes: &GeneModel,
    studies: &[StudyModel],
) -> f64 {
    let per_gene: Vec<f64> = (0..data.n_genes())
        .into_par_iter()
        .map(|g| {
            let mut phi = 0.0;
            for ((xk, study), model) in x.iter().zip(data.studies()).zip(studies) {
                let yk = study.matrix.values();
                for c in 0..xk.ncols() {
                    let r = yk[(g, c)] - model.spline.eval(xk[(g, c)]);
                    let d = xk[(g, c)] - genes.mu[g];
                    phi += r * r / (2.0 * model.tau2) + d * d / (2.0 * genes.sigma2[g]);
                }
            }
            phi
        })
        .collect();
    per_gene.iter().sum()
}

#[derive(Debug, Clone)]
pub struct AdjustmentResult {
    pub adjusted: Vec<Array2<f64>>,
    pub genes: GeneModel,
    pub studies: Vec<StudyModel>,
    /// Data objective `Φ` before the first and after every outer iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub outer_iterations: usize,
    pub monotone_violations: usize,
    pub rectification: Rectification,
    pub invariant: InvariantSet,
    pub posterior: PosteriorValue,
}

impl AdjustmentResult {
    /// True when the traced objective never increased.
    pub fn trace_is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1] <= w[0])
    }
}

fn broadcast_means(data: &StudySet, mu: &[f64]) -> Vec<Array2<f64>> {
    data.studies()
        .iter()
        .map(|s| Array2::from_shape_fn(s.matrix.values().dim(), |(g, _)| mu[g]))
        .collect()
}

/// Observation functions and noise variances from the invariant genes,
/// evaluated at the gene means.
fn fit_study_models(
    data: &StudySet,
    mu: &[f64],
    invariant: &InvariantSet,
    lambdas: &[Lambda],
    lambda_reg: f64,
) -> Result<Vec<StudyModel>> {
    let at_means = broadcast_means(data, mu);
    let fits = estimate_observation_functions(data, &at_means, invariant, lambdas)?;
    let tau2 = estimate_noise_variances(data, &at_means, &fits, invariant, lambda_reg)?;
    for (s, f) in data.studies().iter().zip(&fits) {
        let (lo, hi) = mu
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        if !f.spline.is_increasing_on(lo, hi) {
            warn!(
                "observation function of study '{}' is not increasing over the data range",
                s.id
            );
        }
    }
    Ok(fits
        .into_iter()
        .zip(tau2)
        .map(|(fit, tau2)| StudyModel {
            tau2,
            spline: fit.spline,
            lambda_reg,
            lambda: fit.lambda,
        })
        .collect())
}

/// Full merging run: rectification-based initialization, parameter
/// estimation, then alternating gene-value sweeps and mean updates.
pub fn run_pipeline(
    data: &StudySet,
    spec: &InvariantSetSpec,
    config: &AdjustmentConfig,
    lambdas: &[Lambda],
    lambda_reg: f64,
) -> Result<AdjustmentResult> {
    config.validate()?;
    spec.validate()?;
    if lambdas.len() != data.n_studies() {
        return Err(Error::Parameter(format!(
            "{} penalties for {} studies",
            lambdas.len(),
            data.n_studies()
        )));
    }
    let mut rectification = initialize_rectification(data, lambdas)?;
    if config.balance_scale {
        rectification = balance_intrinsic_scale(data, &rectification)?;
    }
    let x0 = rectification.x0.clone();
    let mut mu = estimate_means(&x0);
    let sigma2 = estimate_gene_variances(&x0, &mu, config.variance_floor)?;
    let invariant = InvariantSet::select(data, spec)?;
    let mut studies = fit_study_models(data, &mu, &invariant, lambdas, lambda_reg)?;
    for (s, m) in data.studies().iter().zip(&studies) {
        debug!(
            "study '{}': tau2 = {:.4e}, lambda = {:.4e}",
            s.id, m.tau2, m.lambda
        );
    }
    let mut genes = GeneModel::new(mu.clone(), sigma2)?;

    let mut x = x0;
    let mut trace = vec![data_objective(data, &x, &genes, &studies)];
    let mut converged = false;
    let mut violations = 0;
    let mut outer = 0;
    for _ in 0..config.max_outer_iters {
        outer += 1;
        let swept = sweep(data, &x, &genes, &studies, config)?;
        violations += swept.monotone_violations;
        if swept.rejected_steps > 0 {
            debug!(
                "{} genes kept their values after failed backtracking",
                swept.rejected_steps
            );
        }
        x = swept.x;
        mu = estimate_means(&x);
        genes.mu = mu.clone();
        if config.refit_each_outer {
            let fixed: Vec<Lambda> = studies.iter().map(|s| Lambda::Fixed(s.lambda)).collect();
            studies = fit_study_models(data, &mu, &invariant, &fixed, lambda_reg)?;
        }
        let phi = data_objective(data, &x, &genes, &studies);
        let previous = *trace.last().expect("trace starts non-empty");
        trace.push(phi);
        if (previous - phi).abs() <= config.rel_tol * previous.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    let lambdas_used: Vec<f64> = studies.iter().map(|s| s.lambda).collect();
    let posterior = posterior(&x, data, &genes, &studies, &lambdas_used)?;
    Ok(AdjustmentResult {
        adjusted: x,
        genes,
        studies,
        trace,
        converged,
        outer_iterations: outer,
        monotone_violations: violations,
        rectification,
        invariant,
        posterior,
    })
}
