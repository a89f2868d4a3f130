//! Classical (Torgerson) multidimensional scaling to two dimensions.

use nalgebra::{DMatrix, SymmetricEigen};

use super::lof::euclidean;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mds {
    pub coords: Vec<[f64; 2]>,
    /// Set when fewer than two positive eigenvalues exist; the missing
    /// coordinates are zero.
    pub rank_deficient: bool,
    pub eigenvalues: [f64; 2],
}

/// Eigenvalues at or below `EIG_TOL · max(1, λ₁)` count as zero.
const EIG_TOL: f64 = 1e-10;

pub fn classical_mds(points: &[Vec<f64>]) -> Result<Mds> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Parameter(format!(
            "MDS needs at least 3 points, got {n}"
        )));
    }
    let mut sq = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&points[i], &points[j]);
            sq[(i, j)] = d * d;
            sq[(j, i)] = d * d;
        }
    }
    // B = -½ J D² J
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand)
    });

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = EIG_TOL * top.max(1.0);
    let mut coords = vec![[0.0; 2]; n];
    let mut eigenvalues = [0.0; 2];
    let mut rank_deficient = false;
    for (axis, &col) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[col];
        if lambda <= tol {
            rank_deficient = true;
            continue;
        }
        eigenvalues[axis] = lambda;
        let mut v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let first = v.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(0.0);
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let scale = lambda.sqrt();
        for (c, vi) in coords.iter_mut().zip(&v) {
            c[axis] = vi * scale;
        }
    }
    if rank_deficient {
        log::warn!("MDS input has rank < 2; missing axes set to 0");
    }
    Ok(Mds {
        coords,
        rank_deficient,
        eigenvalues,
    })
}
