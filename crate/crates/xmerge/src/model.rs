//! Domain types, gene-universe alignment and the log-posterior objective.

use std::collections::{HashMap, HashSet};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::spline::CubicSpline;

/// Genes × arrays matrix of log-expression values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    gene_ids: Vec<String>,
    array_ids: Vec<String>,
    values: Array2<f64>,
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Parameter(format!("duplicate {what} id '{id}'")));
        }
    }
    Ok(())
}

impl ExpressionMatrix {
    pub fn new(gene_ids: Vec<String>, array_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != gene_ids.len() || values.ncols() != array_ids.len() {
            return Err(Error::Shape(format!(
                "matrix is {}x{} but {} gene ids and {} array ids were given",
                values.nrows(),
                values.ncols(),
                gene_ids.len(),
                array_ids.len()
            )));
        }
        if let Some(((g, a), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite value for gene '{}' array '{}'",
                gene_ids[g], array_ids[a]
            )));
        }
        check_unique(&gene_ids, "gene")?;
        check_unique(&array_ids, "array")?;
        Ok(ExpressionMatrix {
            gene_ids,
            array_ids,
            values,
        })
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn array_ids(&self) -> &[String] {
        &self.array_ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_arrays(&self) -> usize {
        self.array_ids.len()
    }

    /// Same identifiers, new values.
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        Self::new(self.gene_ids.clone(), self.array_ids.clone(), values)
    }

    /// Keeps the listed array columns in the given order.
    pub fn select_arrays(&self, columns: &[usize]) -> Result<Self> {
        let values = self.values.select(ndarray::Axis(1), columns);
        let ids = columns.iter().map(|&c| self.array_ids[c].clone()).collect();
        Self::new(self.gene_ids.clone(), ids, values)
    }

    /// Keeps the listed gene rows in the given order.
    pub fn select_genes(&self, rows: &[usize]) -> Result<Self> {
        let values = self.values.select(ndarray::Axis(0), rows);
        let ids = rows.iter().map(|&r| self.gene_ids[r].clone()).collect();
        Self::new(ids, self.array_ids.clone(), values)
    }

    /// Column-wise concatenation over a shared gene list.
    pub fn concat_arrays(parts: &[&ExpressionMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.gene_ids != first.gene_ids) {
            return Err(Error::Shape(
                "concatenated matrices must share gene ids".into(),
            ));
        }
        let views: Vec<_> = parts.iter().map(|p| p.values.view()).collect();
        let values = ndarray::concatenate(ndarray::Axis(1), &views)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let ids = parts
            .iter()
            .flat_map(|p| p.array_ids.iter().cloned())
            .collect();
        Self::new(first.gene_ids.clone(), ids, values)
    }
}

/// One study: its matrix plus a condition label per array.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub id: String,
    pub matrix: ExpressionMatrix,
    pub labels: Vec<String>,
}

impl Study {
    pub fn new(
        id: impl Into<String>,
        matrix: ExpressionMatrix,
        labels: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != matrix.n_arrays() {
            return Err(Error::Shape(format!(
                "{} labels for {} arrays",
                labels.len(),
                matrix.n_arrays()
            )));
        }
        Ok(Study {
            id: id.into(),
            matrix,
            labels,
        })
    }

    /// A study whose arrays all carry the same placeholder label.
    pub fn unlabeled(id: impl Into<String>, matrix: ExpressionMatrix) -> Self {
        let labels = vec!["NA".to_string(); matrix.n_arrays()];
        Study {
            id: id.into(),
            matrix,
            labels,
        }
    }
}

/// Studies sharing one gene universe, in one row order.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySet {
    studies: Vec<Study>,
    gene_ids: Vec<String>,
}

impl StudySet {
    pub fn new(studies: Vec<Study>) -> Result<Self> {
        let first = studies
            .first()
            .ok_or_else(|| Error::Parameter("a study set needs at least one study".into()))?;
        let gene_ids = first.matrix.gene_ids().to_vec();
        let mut ids = HashSet::new();
        for s in &studies {
            if s.matrix.gene_ids() != gene_ids.as_slice() {
                return Err(Error::Shape(format!(
                    "study '{}' does not share the gene universe order",
                    s.id
                )));
            }
            if s.matrix.n_arrays() < 2 {
                return Err(Error::Parameter(format!(
                    "study '{}' has fewer than 2 arrays",
                    s.id
                )));
            }
            if !ids.insert(s.id.clone()) {
                return Err(Error::Parameter(format!("duplicate study id '{}'", s.id)));
            }
        }
        Ok(StudySet { studies, gene_ids })
    }

    pub fn studies(&self) -> &[Study] {
        &self.studies
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }

    pub fn total_arrays(&self) -> usize {
        self.studies.iter().map(|s| s.matrix.n_arrays()).sum()
    }

    /// Observed values of every study, in study order.
    pub fn observed(&self) -> Vec<Array2<f64>> {
        self.studies
            .iter()
            .map(|s| s.matrix.values().clone())
            .collect()
    }

    /// Checks that `values` has one matrix per study with matching shapes.
    pub fn check_shape(&self, values: &[Array2<f64>]) -> Result<()> {
        if values.len() != self.studies.len() {
            return Err(Error::Shape(format!(
                "{} value matrices for {} studies",
                values.len(),
                self.studies.len()
            )));
        }
        for (v, s) in values.iter().zip(&self.studies) {
            if v.dim() != s.matrix.values().dim() {
                return Err(Error::Shape(format!(
                    "values for study '{}' are {:?}, expected {:?}",
                    s.id,
                    v.dim(),
                    s.matrix.values().dim()
                )));
            }
        }
        Ok(())
    }
}

/// A study set together with the genes each input lost to the intersection.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub set: StudySet,
    pub dropped: Vec<Vec<String>>,
}

/// Restricts every study to the genes present in all of them. Rows follow
/// the gene order of the first study.
pub fn align_gene_universe(raw: Vec<Study>) -> Result<Alignment> {
    if raw.is_empty() {
        return Err(Error::Alignment("no studies given".into()));
    }
    if let Some(s) = raw
        .iter()
        .find(|s| s.matrix.n_genes() == 0 || s.matrix.n_arrays() == 0)
    {
        return Err(Error::Alignment(format!("study '{}' is empty", s.id)));
    }
    let sets: Vec<HashSet<&str>> = raw
        .iter()
        .map(|s| s.matrix.gene_ids().iter().map(String::as_str).collect())
        .collect();
    let shared: Vec<String> = raw[0]
        .matrix
        .gene_ids()
        .iter()
        .filter(|g| sets.iter().all(|set| set.contains(g.as_str())))
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(Error::Alignment("studies share no genes".into()));
    }
    let shared_set: HashSet<&str> = shared.iter().map(String::as_str).collect();
    let mut studies = Vec::with_capacity(raw.len());
    let mut dropped = Vec::with_capacity(raw.len());
    for s in &raw {
        let index: HashMap<&str, usize> = s
            .matrix
            .gene_ids()
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect();
        let rows: Vec<usize> = shared.iter().map(|g| index[g.as_str()]).collect();
        dropped.push(
            s.matrix
                .gene_ids()
                .iter()
                .filter(|g| !shared_set.contains(g.as_str()))
                .cloned()
                .collect(),
        );
        studies.push(Study::new(
            s.id.clone(),
            s.matrix.select_genes(&rows)?,
            s.labels.clone(),
        )?);
    }
    Ok(Alignment {
        set: StudySet::new(studies)?,
        dropped,
    })
}

/// Per-gene mean and variance of the intrinsic expression.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneModel {
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl GeneModel {
    pub fn new(mu: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        let model = GeneModel { mu, sigma2 };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.len() != self.sigma2.len() {
            return Err(Error::Shape("mu and sigma2 lengths differ".into()));
        }
        if self.mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Parameter("non-finite gene mean".into()));
        }
        if self.sigma2.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Parameter(
                "gene variances must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Per-study noise and observation function.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyModel {
    /// Noise variance, already including the `lambda_reg²` offset.
    pub tau2: f64,
    pub spline: CubicSpline,
    pub lambda_reg: f64,
    /// Smoothing penalty of the observation function.
    pub lambda: f64,
}

impl StudyModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau2 > 0.0) || !self.tau2.is_finite() {
            return Err(Error::Parameter(format!(
                "noise variance must be positive, got {}",
                self.tau2
            )));
        }
        if !(self.lambda_reg >= 0.0) {
            return Err(Error::Parameter("lambda_reg must be nonnegative".into()));
        }
        Ok(())
    }
}

/// The three additive terms of the log posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorValue {
    /// Observation fit.
    pub l1: f64,
    /// Deviation from the gene means.
    pub l2: f64,
    /// Curvature prior on the observation functions.
    pub l3: f64,
    pub total: f64,
}

impl PosteriorValue {
    /// Magnitude of the data terms, the quantity the adjustment minimizes.
    pub fn data_objective(&self) -> f64 {
        -(self.l1 + self.l2)
    }
}

/// Log posterior (up to a constant) of intrinsic values `x` given observed data.
pub fn posterior(
    x: &[Array2<f64>],
    y: &StudySet,
    genes: &GeneModel,
    studies: &[StudyModel],
    lambdas: &[f64],
) -> Result<PosteriorValue> {
    y.check_shape(x)?;
    genes.validate()?;
    if genes.len() != y.n_genes() {
        return Err(Error::Shape(format!(
            "gene model has {} genes, data has {}",
            genes.len(),
            y.n_genes()
        )));
    }
    if studies.len() != y.n_studies() || lambdas.len() != y.n_studies() {
        return Err(Error::Shape(
            "one study model and one penalty per study required".into(),
        ));
    }
    for s in studies {
        s.validate()?;
    }
    if lambdas.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Parameter(
            "spline penalties must be nonnegative".into(),
        ));
    }
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for ((xk, study), model) in x.iter().zip(y.studies()).zip(studies) {
        let yk = study.matrix.values();
        for ((g, c), &xv) in xk.indexed_iter() {
            let r = yk[(g, c)] - model.spline.eval(xv);
            l1 -= r * r / (2.0 * model.tau2);
            let d = xv - genes.mu[g];
            l2 -= d * d / (2.0 * genes.sigma2[g]);
        }
    }
    let l3 = -studies
        .iter()
        .zip(lambdas)
        .map(|(s, &l)| l * s.spline.curvature_energy())
        .sum::<f64>();
    Ok(PosteriorValue {
        l1,
        l2,
        l3,
        total: l1 + l2 + l3,
    })
}
