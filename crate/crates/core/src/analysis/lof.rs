//! Local Outlier Factor over Euclidean points.
//!
//! Exact O(N²) computation. The k-distance neighbourhood of a point includes
//! every other point no farther than its k-th nearest neighbour, so ties can
//! make a neighbourhood larger than `k`. Neighbourhoods are kept in ascending
//! index order and all sums run in that order.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Upper bound on local reachability density. Coincident points have zero
/// reachability distance; capping their density keeps the ratio defined
/// (a group of coincident points gets LOF 1).
pub const LRD_CAP: f64 = 1e12;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone)]
struct Neighbourhood {
    k_distance: f64,
    /// (index, distance), ascending index.
    members: Vec<(usize, f64)>,
}

fn neighbourhood(points: &[Vec<f64>], p: usize, k: usize) -> Neighbourhood {
    let dists: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .filter(|&(q, _)| q != p)
        .map(|(q, pt)| (q, euclidean(&points[p], pt)))
        .collect();
    let mut sorted: Vec<f64> = dists.iter().map(|&(_, d)| d).collect();
    sorted.sort_by(f64::total_cmp);
    let k_distance = sorted[k - 1];
    let members = dists.into_iter().filter(|&(_, d)| d <= k_distance).collect();
    Neighbourhood {
        k_distance,
        members,
    }
}

/// LOF score of every point, in input order.
pub fn lof_scores(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    let n = points.len();
    if k < 1 || k >= n {
        return Err(Error::Parameter(format!(
            "LOF requires 1 <= k < number of points, got k={k} for {n} points"
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("LOF points have differing dimensions".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("LOF points must be finite".into()));
    }

    let hoods: Vec<Neighbourhood> = (0..n)
        .into_par_iter()
        .map(|p| neighbourhood(points, p, k))
        .collect();

    let lrd: Vec<f64> = hoods
        .par_iter()
        .map(|h| {
            let reach_sum: f64 = h
                .members
                .iter()
                .map(|&(o, d)| hoods[o].k_distance.max(d))
                .sum();
            let mean = reach_sum / h.members.len() as f64;
            if mean == 0.0 {
                LRD_CAP
            } else {
                (1.0 / mean).min(LRD_CAP)
            }
        })
        .collect();

    Ok(hoods
        .par_iter()
        .enumerate()
        .map(|(p, h)| {
            let sum: f64 = h.members.iter().map(|&(o, _)| lrd[o]).sum();
            sum / h.members.len() as f64 / lrd[p]
        })
        .collect())
}
