//! Normalized principal component analysis of arrays.
//!
//! Genes are standardized across arrays and the arrays are projected on the
//! leading eigenvectors of the array-by-array correlation matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// Coordinates of each array on the first two components.
    pub scores: Vec<[f64; 2]>,
    pub eigenvalues: [f64; 2],
    /// Fraction of the total variance carried by each component.
    pub explained: [f64; 2],
    /// Genes with zero variance, left out of the analysis.
    pub constant_genes: usize,
}

/// First factorial plane of a genes × arrays matrix.
///
/// Scores are `sqrt(λ) v`, so that the squared scores of a component sum to
/// its eigenvalue. The sign of each component makes its largest-magnitude
/// entry positive.
pub fn first_plane(values: &Array2<f64>) -> Result<Pca> {
    let (n_genes, n_arrays) = values.dim();
    if n_arrays < 3 {
        return Err(Error::Shape(
            "principal components need at least 3 arrays".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_genes);
    let mut constant = 0;
    for row in values.rows() {
        let n = n_arrays as f64;
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if !(var > 0.0) {
            constant += 1;
            continue;
        }
        let sd = var.sqrt();
        rows.push(row.iter().map(|v| (v - mean) / sd).collect::<Vec<f64>>());
    }
    if rows.is_empty() {
        return Err(Error::Shape("every gene is constant".into()));
    }
    let g = rows.len() as f64;
    let mut corr = DMatrix::<f64>::zeros(n_arrays, n_arrays);
    for r in &rows {
        for i in 0..n_arrays {
            for j in i..n_arrays {
                corr[(i, j)] += r[i] * r[j];
            }
        }
    }
    for i in 0..n_arrays {
        for j in i..n_arrays {
            let v = corr[(i, j)] / g;
            corr[(i, j)] = v;
            corr[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..n_arrays).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut scores = vec![[0.0; 2]; n_arrays];
    let mut eigenvalues = [0.0; 2];
    for (comp, &idx) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[idx].max(0.0);
        let v = eig.eigenvectors.column(idx);
        let lead = (0..n_arrays)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .expect("non-empty");
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for (c, s) in scores.iter_mut().enumerate() {
            s[comp] = sign * lambda.sqrt() * v[c];
        }
        eigenvalues[comp] = lambda;
    }
    Ok(Pca {
        scores,
        eigenvalues,
        explained: [eigenvalues[0] / total, eigenvalues[1] / total],
        constant_genes: constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_groups_separate_on_first_axis() {
        let values = Array2::from_shape_fn((50, 6), |(g, c)| {
            let group = if c < 3 { 1.0 } else { -1.0 };
            group * (1.0 + g as f64 * 0.01) + 0.01 * ((g * 7 + c * 3) % 5) as f64
        });
        let pca = first_plane(&values).unwrap();
        let left: Vec<f64> = pca.scores[..3].iter().map(|s| s[0]).collect();
        let right: Vec<f64> = pca.scores[3..].iter().map(|s| s[0]).collect();
        assert!(left.iter().all(|&v| v.signum() == left[0].signum()));
        assert!(right.iter().all(|&v| v.signum() == -left[0].signum()));
        assert!(pca.explained[0] > 0.9);
    }

    #[test]
    fn squared_scores_sum_to_eigenvalue() {
        let values = Array2::from_shape_fn((20, 5), |(g, c)| {
            ((g * 13 + c * 7) % 11) as f64 + (c * c) as f64 * 0.1
        });
        let pca = first_plane(&values).unwrap();
        for k in 0..2 {
            let s: f64 = pca.scores.iter().map(|s| s[k] * s[k]).sum();
            assert!((s - pca.eigenvalues[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_genes_are_skipped() {
        let mut values = Array2::from_shape_fn((4, 4), |(g, c)| (g * c) as f64);
        values.row_mut(0).fill(3.0);
        let pca = first_plane(&values).unwrap();
        assert_eq!(pca.constant_genes, 1);
    }
}
