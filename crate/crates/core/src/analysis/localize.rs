use serde::{Deserialize, Serialize};

use crate::data::MultiHot;
use crate::error::{Error, Result};
use crate::neural::ReconstructionMatrix;

pub const DEFAULT_EVENT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Expected by the reconstruction but absent from the sequence.
    Missing,
    /// Present in the sequence but unexpected.
    Redundant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEntry {
    pub slot: usize,
    pub event: usize,
    pub kind: AnomalyKind,
    pub score: f64,
    pub support_rate: Option<f64>,
}

/// Flags every cell whose anomaly score reaches `threshold`. A missing
/// event scores its reconstruction probability, a redundant one scores one
/// minus it. Sorted by score descending, then slot, then event.
pub fn localize_events(
    x: &MultiHot,
    recon: &ReconstructionMatrix,
    threshold: f64,
) -> Result<Vec<AnomalyEntry>> {
    if x.rows() != recon.rows || x.cols() != recon.cols {
        return Err(Error::Shape(format!(
            "sequence is {}x{}, reconstruction is {}x{}",
            x.rows(),
            x.cols(),
            recon.rows,
            recon.cols
        )));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Parameter(format!(
            "event threshold must lie in [0, 1], got {threshold}"
        )));
    }
    let mut entries = Vec::new();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let p = recon.get(i, j);
            let (kind, score) = if x.get(i, j) == 0.0 {
                (AnomalyKind::Missing, p)
            } else {
                (AnomalyKind::Redundant, 1.0 - p)
            };
            if score >= threshold {
                entries.push(AnomalyEntry {
                    slot: i,
                    event: j,
                    kind,
                    score,
                    support_rate: None,
                });
            }
        }
    }
    sort_entries(&mut entries);
    Ok(entries)
}

pub fn sort_entries(entries: &mut [AnomalyEntry]) {
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.slot.cmp(&b.slot))
            .then(a.event.cmp(&b.event))
    });
}
