use crate::data::EventSequence;
use crate::error::{Error, Result};

pub const DEFAULT_KNN_K: usize = 5;

/// Slot event sets concatenated in slot order, each in index order.
pub fn flatten(s: &EventSequence) -> Vec<usize> {
    s.slots.iter().flat_map(|slot| slot.events.iter().copied()).collect()
}

pub fn lcs_len(a: &[usize], b: &[usize]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 − |LCS| / max(|a|, |b|)` on flattened sequences; 0 for two empty ones.
pub fn lcs_distance_flat(a: &[usize], b: &[usize]) -> f64 {
    let max = a.len().max(b.len());
    if max == 0 {
        return 0.0;
    }
    (max - lcs_len(a, b)) as f64 / max as f64
}

pub fn lcs_distance(a: &EventSequence, b: &EventSequence) -> f64 {
    lcs_distance_flat(&flatten(a), &flatten(b))
}

/// Mean of the `k` smallest values; `k` must lie in `1..=values.len()`.
fn mean_of_smallest(mut values: Vec<f64>, k: usize) -> f64 {
    values.sort_by(f64::total_cmp);
    values[..k].iter().sum::<f64>() / k as f64
}

/// Mean LCS distance from `test` to its `k` nearest training sequences.
pub fn knn_score(test: &EventSequence, train: &[&EventSequence], k: usize) -> Result<f64> {
    let flat: Vec<Vec<usize>> = train.iter().map(|s| flatten(s)).collect();
    knn_score_flat(&flatten(test), &flat, k)
}

pub fn knn_score_flat(test: &[usize], train: &[Vec<usize>], k: usize) -> Result<f64> {
    if k == 0 || k > train.len() {
        return Err(Error::Parameter(format!(
            "k must lie in 1..={}, got {k}",
            train.len()
        )));
    }
    let d = train.iter().map(|t| lcs_distance_flat(test, t)).collect();
    Ok(mean_of_smallest(d, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(sets: &[&[usize]]) -> EventSequence {
        EventSequence::from_sets("s", sets.iter().map(|s| s.to_vec()))
    }

    #[test]
    fn hand_distances() {
        let abc = seq(&[&[0], &[1], &[2]]);
        let ac = seq(&[&[0], &[2]]);
        assert_eq!(lcs_distance(&abc, &ac), 1.0 / 3.0);
        assert_eq!(lcs_distance(&abc, &abc), 0.0);
        assert_eq!(lcs_distance(&abc, &seq(&[&[5, 6]])), 1.0);
        // slot sets flatten in index order
        assert_eq!(flatten(&seq(&[&[2, 0], &[1]])), vec![0, 2, 1]);
    }

    #[test]
    fn knn_hand_case() {
        let test = seq(&[&[0], &[1], &[2]]);
        let train = [
            seq(&[&[0], &[1], &[2]]),
            seq(&[&[0], &[2]]),
            seq(&[&[3], &[4], &[5], &[6]]),
        ];
        let refs: Vec<_> = train.iter().collect();
        // distances 0, 1/3, 1
        assert_eq!(knn_score(&test, &refs, 2).unwrap(), (0.0 + 1.0 / 3.0) / 2.0);
        assert_eq!(knn_score(&test, &refs, 3).unwrap(), (0.0 + 1.0 / 3.0 + 1.0) / 3.0);
        assert!(knn_score(&test, &refs, 4).is_err());
        assert!(knn_score(&test, &refs, 0).is_err());
    }
}
