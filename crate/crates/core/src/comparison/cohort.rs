use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dtw::{dtw_align, AlignmentMap};
use crate::analysis::{AnomalyKind, AnomalyReport};
use crate::data::EventSequence;
use crate::error::{Error, Result};

/// A normal sequence re-expressed on the anomaly's slot axis: slot `i` holds
/// every event from the normal slots aligned to anomaly slot `i`, with the
/// earliest timestamp at which it occurs there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedSequence {
    pub id: String,
    pub slots: Vec<BTreeMap<usize, f64>>,
}

impl ProjectedSequence {
    pub fn new(normal: &EventSequence, alignment: &AlignmentMap, anomaly_len: usize) -> Self {
        let mut slots = vec![BTreeMap::new(); anomaly_len];
        for &(a, b) in &alignment.path {
            let slot = &normal.slots[b];
            for &e in &slot.events {
                slots[a]
                    .entry(e)
                    .and_modify(|t: &mut f64| *t = t.min(slot.time))
                    .or_insert(slot.time);
            }
        }
        ProjectedSequence {
            id: normal.id.clone(),
            slots,
        }
    }

    pub fn has(&self, slot: usize, event: usize) -> bool {
        self.slots[slot].contains_key(&event)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedMember {
    pub sequence: EventSequence,
    pub alignment: AlignmentMap,
    pub projection: ProjectedSequence,
}

/// An anomaly together with a cohort of normals aligned to it, ordered by
/// normal id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedCohort {
    pub anomaly: EventSequence,
    pub members: Vec<AlignedMember>,
}

impl AlignedCohort {
    pub fn align(anomaly: &EventSequence, normals: &[&EventSequence]) -> Result<Self> {
        let mut members = normals
            .par_iter()
            .map(|n| {
                let alignment = dtw_align(anomaly, n)?;
                let projection = ProjectedSequence::new(n, &alignment, anomaly.len());
                Ok(AlignedMember {
                    sequence: (*n).clone(),
                    alignment,
                    projection,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        members.sort_by(|a, b| a.sequence.id.cmp(&b.sequence.id));
        if members.windows(2).any(|w| w[0].sequence.id == w[1].sequence.id) {
            return Err(Error::Parameter("cohort contains a duplicate id".into()));
        }
        Ok(AlignedCohort {
            anomaly: anomaly.clone(),
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn projections(&self) -> Vec<ProjectedSequence> {
        self.members.iter().map(|m| m.projection.clone()).collect()
    }

    /// Restricts the cohort to the given ids; unknown ids are an error.
    pub fn restrict(&self, ids: &[&str]) -> Result<AlignedCohort> {
        let mut members = Vec::with_capacity(ids.len());
        for id in ids {
            let m = self
                .members
                .iter()
                .find(|m| m.sequence.id == *id)
                .ok_or_else(|| Error::UnknownId(id.to_string()))?;
            members.push(m.clone());
        }
        members.sort_by(|a, b| a.sequence.id.cmp(&b.sequence.id));
        members.dedup_by(|a, b| a.sequence.id == b.sequence.id);
        Ok(AlignedCohort {
            anomaly: self.anomaly.clone(),
            members,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportedReport {
    pub report: AnomalyReport,
    pub cohort_size: usize,
    /// True when the cohort was empty and no rate could be computed.
    pub support_unset: bool,
}

/// Whether a projected normal sequence supports the entry being anomalous.
pub fn supports(projection: &ProjectedSequence, slot: usize, event: usize, kind: AnomalyKind) -> bool {
    let present = projection.has(slot, event);
    match kind {
        AnomalyKind::Missing => present,
        AnomalyKind::Redundant => !present,
    }
}

/// Fraction of the cohort supporting each entry. Entries keep their order.
pub fn support_rates_projected(
    report: &AnomalyReport,
    projections: &[ProjectedSequence],
) -> Result<SupportedReport> {
    let mut out = report.clone();
    if projections.is_empty() {
        for e in &mut out.entries {
            e.support_rate = None;
        }
        return Ok(SupportedReport {
            report: out,
            cohort_size: 0,
            support_unset: true,
        });
    }
    for e in &mut out.entries {
        if let Some(p) = projections.iter().find(|p| e.slot >= p.slots.len()) {
            return Err(Error::Parameter(format!(
                "entry slot {} outside projection of {}",
                e.slot, p.id
            )));
        }
        let count = projections
            .iter()
            .filter(|p| supports(p, e.slot, e.event, e.kind))
            .count();
        e.support_rate = Some(count as f64 / projections.len() as f64);
    }
    Ok(SupportedReport {
        report: out,
        cohort_size: projections.len(),
        support_unset: false,
    })
}

/// Support rates for `report` against normals aligned to `anomaly`.
pub fn support_rates(
    report: &AnomalyReport,
    anomaly: &EventSequence,
    aligned: &[(EventSequence, AlignmentMap)],
) -> Result<SupportedReport> {
    let mut projections = Vec::with_capacity(aligned.len());
    for (seq, map) in aligned {
        let covered = (0..anomaly.len()).all(|i| map.normal_slots_for(i).next().is_some());
        if !covered {
            return Err(Error::Parameter(format!(
                "alignment of {} does not cover every anomaly slot",
                seq.id
            )));
        }
        projections.push(ProjectedSequence::new(seq, map, anomaly.len()));
    }
    support_rates_projected(report, &projections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{AnomalyEntry, Thresholds};

    fn report(entries: Vec<AnomalyEntry>) -> AnomalyReport {
        AnomalyReport {
            sequence_id: "x".into(),
            lof_score: 2.0,
            thresholds: Thresholds::default(),
            entries,
        }
    }

    fn entry(slot: usize, event: usize, kind: AnomalyKind) -> AnomalyEntry {
        AnomalyEntry {
            slot,
            event,
            kind,
            score: 0.9,
            support_rate: None,
        }
    }

    fn align_all(anomaly: &EventSequence, normals: &[EventSequence]) -> Vec<(EventSequence, AlignmentMap)> {
        normals
            .iter()
            .map(|n| (n.clone(), dtw_align(anomaly, n).unwrap()))
            .collect()
    }

    #[test]
    fn missing_event_three_of_four() {
        // anomaly lacks event 2 at slot 1
        let anomaly = EventSequence::from_sets("x", [vec![0], vec![1], vec![3]]);
        let normals = vec![
            EventSequence::from_sets("n1", [vec![0], vec![1, 2], vec![3]]),
            EventSequence::from_sets("n2", [vec![0], vec![1, 2], vec![3]]),
            EventSequence::from_sets("n3", [vec![0], vec![1, 2], vec![3]]),
            EventSequence::from_sets("n4", [vec![0], vec![1], vec![3]]),
        ];
        let r = report(vec![entry(1, 2, AnomalyKind::Missing)]);
        let out = support_rates(&r, &anomaly, &align_all(&anomaly, &normals)).unwrap();
        assert_eq!(out.report.entries[0].support_rate, Some(0.75));
    }

    #[test]
    fn redundant_event_absent_everywhere() {
        let anomaly = EventSequence::from_sets("x", [vec![0], vec![1, 4], vec![3]]);
        let normals = vec![
            EventSequence::from_sets("n1", [vec![0], vec![1], vec![3]]),
            EventSequence::from_sets("n2", [vec![0], vec![1], vec![1], vec![3]]),
        ];
        let r = report(vec![entry(1, 4, AnomalyKind::Redundant)]);
        let out = support_rates(&r, &anomaly, &align_all(&anomaly, &normals)).unwrap();
        assert_eq!(out.report.entries[0].support_rate, Some(1.0));
    }

    #[test]
    fn single_member_cohort() {
        let anomaly = EventSequence::from_sets("x", [vec![0], vec![1]]);
        let normals = vec![EventSequence::from_sets("n1", [vec![0, 5], vec![1]])];
        let r = report(vec![entry(0, 5, AnomalyKind::Missing)]);
        let out = support_rates(&r, &anomaly, &align_all(&anomaly, &normals)).unwrap();
        assert_eq!(out.report.entries[0].support_rate, Some(1.0));
    }

    #[test]
    fn empty_cohort_unsets() {
        let anomaly = EventSequence::from_sets("x", [vec![0], vec![1]]);
        let mut e = entry(0, 5, AnomalyKind::Missing);
        e.support_rate = Some(0.3);
        let out = support_rates(&report(vec![e]), &anomaly, &[]).unwrap();
        assert!(out.support_unset);
        assert_eq!(out.report.entries[0].support_rate, None);
    }

    #[test]
    fn many_to_one_uses_any_aligned_slot() {
        // normal slots 1 and 2 both align to anomaly slot 1
        let anomaly = EventSequence::from_sets("x", [vec![0], vec![1], vec![9]]);
        let normal = EventSequence::from_sets("n", [vec![0], vec![1], vec![1, 7], vec![9]]);
        let map = dtw_align(&anomaly, &normal).unwrap();
        let p = ProjectedSequence::new(&normal, &map, anomaly.len());
        assert!(p.has(1, 7));
        assert!(p.has(1, 1));
        assert!(!p.has(0, 7));
    }
}
