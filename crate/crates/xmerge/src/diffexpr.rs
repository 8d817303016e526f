//! Differential expression between two condition groups.
//!
//! Per-gene Welch t-tests, Benjamini–Hochberg adjustment, variance filtering
//! and set comparisons between call sets of several analyses.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::ExpressionMatrix;

/// Lower bound applied to each group variance in the t statistic.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Default FDR level.
pub const DEFAULT_Q: f64 = 0.05;

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Genes kept after dropping the `drop_fraction` least variable ones,
/// ranked by sample variance across all arrays. Ties keep the lower index.
/// Returned in increasing order.
pub fn variance_filter(data: &ExpressionMatrix, drop_fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&drop_fraction) {
        return Err(Error::Parameter("drop_fraction must lie in [0, 1)".into()));
    }
    if data.n_arrays() < 2 {
        return Err(Error::Shape(
            "variance filtering needs at least 2 arrays".into(),
        ));
    }
    let n = data.n_genes();
    let drop = (drop_fraction * n as f64 + 1e-9).floor() as usize;
    let variances: Vec<f64> = data
        .values()
        .rows()
        .into_iter()
        .map(|r| mean_var(&r.to_vec()).1)
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]).then(a.cmp(&b)));
    let mut kept = order[..n - drop].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
    /// Sign of `mean(a) − mean(b)`.
    pub direction: i8,
}

/// Welch two-sample t-test with Welch–Satterthwaite degrees of freedom and a
/// two-sided p-value.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Shape("each group needs at least 2 values".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Parameter("non-finite value in t-test input".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let diff = ma - mb;
    let direction = if diff > 0.0 {
        1
    } else if diff < 0.0 {
        -1
    } else {
        0
    };
    if va <= VARIANCE_FLOOR && vb <= VARIANCE_FLOOR && diff == 0.0 {
        return Ok(TTest {
            t: 0.0,
            p: 1.0,
            df: (a.len() + b.len() - 2) as f64,
            direction: 0,
        });
    }
    let sa = va.max(VARIANCE_FLOOR) / a.len() as f64;
    let sb = vb.max(VARIANCE_FLOOR) / b.len() as f64;
    let se2 = sa + sb;
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Parameter(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(TTest {
        t,
        p,
        df,
        direction,
    })
}

/// Benjamini–Hochberg step-up adjustment: the adjusted value of the `i`-th
/// smallest p-value is `min_{j ≥ i} p_(j) m / j`, capped at 1, and is
/// returned at the position of the original p-value.
pub fn fdr_adjust(pvalues: &[f64]) -> Result<Vec<f64>> {
    if pvalues.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Parameter("p-values must lie in [0, 1]".into()));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        let value = (pvalues[i] * m as f64 / (rank + 1) as f64).max(pvalues[i]);
        running = running.min(value);
        adjusted[i] = running.min(1.0);
    }
    Ok(adjusted)
}

/// Per-gene test results for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffResult {
    pub gene_ids: Vec<String>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub p_adj: Vec<f64>,
    pub direction: Vec<i8>,
    pub q: f64,
    /// Group names; positive direction means higher in `groups.0`.
    pub groups: (String, String),
}

impl DiffResult {
    pub fn len(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gene_ids.is_empty()
    }

    /// Genes with adjusted p-value at most `q`.
    pub fn calls_at(&self, q: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.p_adj[i] <= q).collect()
    }

    pub fn calls(&self) -> Vec<usize> {
        self.calls_at(self.q)
    }

    pub fn callset(&self, name: impl Into<String>) -> CallSet {
        let mut up = BTreeSet::new();
        let mut down = BTreeSet::new();
        for i in self.calls() {
            match self.direction[i] {
                1 => {
                    up.insert(self.gene_ids[i].clone());
                }
                -1 => {
                    down.insert(self.gene_ids[i].clone());
                }
                _ => {}
            }
        }
        CallSet {
            name: name.into(),
            up,
            down,
        }
    }

    /// Tab-separated table `gene, t, p, p_adj, direction, called`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gene\tt\tp\tp_adj\tdirection\tcalled\n");
        for i in 0..self.len() {
            let dir = match self.direction[i] {
                1 => format!("{}>{}", self.groups.0, self.groups.1),
                -1 => format!("{}<{}", self.groups.0, self.groups.1),
                _ => "none".to_string(),
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                self.gene_ids[i],
                self.t[i],
                self.p[i],
                self.p_adj[i],
                dir,
                u8::from(self.p_adj[i] <= self.q)
            );
        }
        out
    }
}

/// Tests every gene of `data` between the arrays labelled `group1` and
/// `group2`.
pub fn analyze(
    data: &ExpressionMatrix,
    labels: &[String],
    group1: &str,
    group2: &str,
    q: f64,
) -> Result<DiffResult> {
    if labels.len() != data.n_arrays() {
        return Err(Error::Shape(format!(
            "{} labels for {} arrays",
            labels.len(),
            data.n_arrays()
        )));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Parameter("q must lie in (0, 1]".into()));
    }
    let cols = |g: &str| -> Vec<usize> { (0..labels.len()).filter(|&c| labels[c] == g).collect() };
    let (ca, cb) = (cols(group1), cols(group2));
    if ca.len() < 2 || cb.len() < 2 {
        return Err(Error::Shape(format!(
            "groups '{group1}' and '{group2}' need at least 2 arrays each (have {} and {})",
            ca.len(),
            cb.len()
        )));
    }
    let values = data.values();
    let tests: Vec<TTest> = (0..data.n_genes())
        .into_par_iter()
        .map(|g| {
            let a: Vec<f64> = ca.iter().map(|&c| values[(g, c)]).collect();
            let b: Vec<f64> = cb.iter().map(|&c| values[(g, c)]).collect();
            t_test(&a, &b)
        })
        .collect::<Result<_>>()?;
    let p: Vec<f64> = tests.iter().map(|t| t.p).collect();
    let p_adj = fdr_adjust(&p)?;
    Ok(DiffResult {
        gene_ids: data.gene_ids().to_vec(),
        t: tests.iter().map(|t| t.t).collect(),
        p,
        p_adj,
        direction: tests.iter().map(|t| t.direction).collect(),
        q,
        groups: (group1.to_string(), group2.to_string()),
    })
}

/// Called genes of one analysis, split by direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSet {
    pub name: String,
    pub up: BTreeSet<String>,
    pub down: BTreeSet<String>,
}

impl CallSet {
    pub fn get(&self, direction: Direction) -> &BTreeSet<String> {
        match direction {
            Direction::Up => &self.up,
            Direction::Down => &self.down,
        }
    }

    /// Genes called in the same direction by both sets.
    pub fn intersection(&self, other: &CallSet, name: impl Into<String>) -> CallSet {
        CallSet {
            name: name.into(),
            up: self.up.intersection(&other.up).cloned().collect(),
            down: self.down.intersection(&other.down).cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.up.len() + self.down.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Up, Direction::Down];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonRow {
    pub reference: String,
    pub candidate: String,
    pub direction: Direction,
    pub reference_size: usize,
    pub candidate_size: usize,
    pub overlap: usize,
    pub reference_only: usize,
    pub candidate_only: usize,
}

impl ComparisonRow {
    fn new(reference: &CallSet, candidate: &CallSet, direction: Direction) -> Self {
        let r = reference.get(direction);
        let c = candidate.get(direction);
        let overlap = r.intersection(c).count();
        ComparisonRow {
            reference: reference.name.clone(),
            candidate: candidate.name.clone(),
            direction,
            reference_size: r.len(),
            candidate_size: c.len(),
            overlap,
            reference_only: r.len() - overlap,
            candidate_only: c.len() - overlap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallsetReport {
    /// Label of the up direction, e.g. `aerobic>anaerobic`.
    pub up_label: String,
    pub down_label: String,
    /// Every candidate against the reference.
    pub rows: Vec<ComparisonRow>,
    /// Every unordered pair of candidates, in input order.
    pub pairwise: Vec<ComparisonRow>,
}

impl CallsetReport {
    pub fn row(&self, candidate: &str, direction: Direction) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.candidate == candidate && r.direction == direction)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "reference\tcandidate\tdirection\treference_size\tcandidate_size\toverlap\treference_only\tcandidate_only\n",
        );
        for r in self.rows.iter().chain(&self.pairwise) {
            let dir = match r.direction {
                Direction::Up => &self.up_label,
                Direction::Down => &self.down_label,
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.reference,
                r.candidate,
                dir,
                r.reference_size,
                r.candidate_size,
                r.overlap,
                r.reference_only,
                r.candidate_only
            );
        }
        out
    }
}

/// Sizes, overlaps and differences of call sets, per direction.
pub fn compare_callsets(
    reference: &CallSet,
    candidates: &[CallSet],
    groups: (&str, &str),
) -> CallsetReport {
    let mut rows = Vec::new();
    for c in candidates {
        for d in Direction::BOTH {
            rows.push(ComparisonRow::new(reference, c, d));
        }
    }
    let mut pairwise = Vec::new();
    for i in 0..candidates.len() {
        for j in i + 1..candidates.len() {
            for d in Direction::BOTH {
                pairwise.push(ComparisonRow::new(&candidates[i], &candidates[j], d));
            }
        }
    }
    CallsetReport {
        up_label: format!("{}>{}", groups.0, groups.1),
        down_label: format!("{}<{}", groups.0, groups.1),
        rows,
        pairwise,
    }
}
