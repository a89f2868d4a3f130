use serde::{Deserialize, Serialize};

use crate::data::EventSequence;
use crate::error::{Error, Result};

/// Monotone slot-to-slot mapping of a normal sequence onto an anomaly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMap {
    pub normal_id: String,
    /// `(anomaly_slot, normal_slot)` pairs from `(0, 0)` to the last slots.
    pub path: Vec<(usize, usize)>,
    pub cost: f64,
}

impl AlignmentMap {
    /// Normal slots mapped to `anomaly_slot`, ascending.
    pub fn normal_slots_for(&self, anomaly_slot: usize) -> impl Iterator<Item = usize> + '_ {
        self.path
            .iter()
            .filter(move |(a, _)| *a == anomaly_slot)
            .map(|&(_, b)| b)
    }
}

/// `1 − |A ∩ B| / |A ∪ B|` on sorted index sets; two empty sets are equal.
pub fn jaccard_distance(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        (union - inter) as f64 / union as f64
    }
}

/// DTW over slot event sets with steps (1,0), (0,1), (1,1).
///
/// Returns the optimal path and its accumulated cost. When several
/// predecessors tie during backtracking the diagonal is preferred, then the
/// step that advances only the second sequence.
pub fn dtw_sets(a: &[&[usize]], b: &[&[usize]]) -> (Vec<(usize, usize)>, f64) {
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let local = jaccard_distance(a[i], b[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[at(i - 1, j - 1)] } else { f64::INFINITY };
                let left = if j > 0 { acc[at(i, j - 1)] } else { f64::INFINITY };
                let up = if i > 0 { acc[at(i - 1, j)] } else { f64::INFINITY };
                diag.min(left).min(up)
            };
            acc[at(i, j)] = best + local;
        }
    }

    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 { acc[at(i - 1, j - 1)] } else { f64::INFINITY };
        let left = if j > 0 { acc[at(i, j - 1)] } else { f64::INFINITY };
        let up = if i > 0 { acc[at(i - 1, j)] } else { f64::INFINITY };
        if diag <= left && diag <= up {
            i -= 1;
            j -= 1;
        } else if left <= up {
            j -= 1;
        } else {
            i -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    (path, acc[at(n - 1, m - 1)])
}

pub fn dtw_align(anomaly: &EventSequence, normal: &EventSequence) -> Result<AlignmentMap> {
    if anomaly.is_empty() || normal.is_empty() {
        return Err(Error::Parameter(format!(
            "cannot align empty sequence ({} or {})",
            anomaly.id, normal.id
        )));
    }
    let a: Vec<&[usize]> = anomaly.slots.iter().map(|s| s.events.as_slice()).collect();
    let b: Vec<&[usize]> = normal.slots.iter().map(|s| s.events.as_slice()).collect();
    let (path, cost) = dtw_sets(&a, &b);
    Ok(AlignmentMap {
        normal_id: normal.id.clone(),
        path,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaccard_cases() {
        assert_eq!(jaccard_distance(&[1, 2], &[1, 2]), 0.0);
        assert_eq!(jaccard_distance(&[1], &[2]), 1.0);
        assert_eq!(jaccard_distance(&[1, 2], &[2, 3]), 2.0 / 3.0);
    }

    #[test]
    fn identical_is_diagonal() {
        let s = EventSequence::from_sets("a", [vec![0], vec![1, 2], vec![3]]);
        let map = dtw_align(&s, &s).unwrap();
        assert_eq!(map.path, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(map.cost, 0.0);
    }

    #[test]
    fn insertion_case_follows_tie_rule() {
        // anomaly [{A},{B}] vs normal [{A},{C},{B}]
        let a = EventSequence::from_sets("a", [vec![0], vec![1]]);
        let b = EventSequence::from_sets("b", [vec![0], vec![2], vec![1]]);
        let map = dtw_align(&a, &b).unwrap();
        assert_eq!(map.cost, 1.0);
        assert_eq!(map.path, vec![(0, 0), (0, 1), (1, 2)]);
    }

    #[test]
    fn disjoint_cost_is_path_length() {
        let a = EventSequence::from_sets("a", [vec![0], vec![1], vec![2]]);
        let b = EventSequence::from_sets("b", [vec![3], vec![4]]);
        let map = dtw_align(&a, &b).unwrap();
        assert_eq!(map.cost, map.path.len() as f64);
        assert_eq!(map.path, vec![(0, 0), (1, 0), (2, 1)]);
    }

    #[test]
    fn empty_rejected() {
        let a = EventSequence::from_sets("a", Vec::<Vec<usize>>::new());
        let b = EventSequence::from_sets("b", [vec![0]]);
        assert!(dtw_align(&a, &b).is_err());
    }
}
