use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::cohort::{support_rates_projected, AlignedCohort, ProjectedSequence};
use super::flow::{build_flow, merge_projection, slot_mapping, summarize_slots, FlowGraph, SlotSummary};
use crate::analysis::{AnomalyEntry, AnomalyReport, Thresholds};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlyphEvent {
    pub entry: AnomalyEntry,
    /// Slot of the entry before any merge.
    pub original_slot: usize,
}

/// Per-slot summary of the anomaly entries. `abnormality` is the largest
/// entry score in the slot, 0 when the slot has none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Glyph {
    pub slot: usize,
    pub abnormality: f64,
    pub events: Vec<GlyphEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySlot {
    pub slot: usize,
    /// Inclusive range of original slots this slot covers.
    pub span: (usize, usize),
    pub start_time: f64,
    pub end_time: f64,
    pub events: Vec<usize>,
}

/// Everything the three comparison views need for one anomaly and cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonView {
    pub anomaly_id: String,
    pub cohort: Vec<String>,
    pub cohort_size: usize,
    pub support_unset: bool,
    pub anomaly_slots: Vec<AnomalySlot>,
    pub glyphs: Vec<Glyph>,
    pub sequences: Vec<ProjectedSequence>,
    /// Absent for an empty cohort.
    pub flow: Option<FlowGraph>,
    pub summaries: Vec<SlotSummary>,
}

fn glyphs_for(slots: usize, entries: &[(usize, AnomalyEntry)]) -> Vec<Glyph> {
    let mut glyphs: Vec<Glyph> = (0..slots)
        .map(|slot| Glyph {
            slot,
            abnormality: 0.0,
            events: Vec::new(),
        })
        .collect();
    for (original_slot, e) in entries {
        let g = &mut glyphs[e.slot];
        g.abnormality = g.abnormality.max(e.score);
        g.events.push(GlyphEvent {
            entry: e.clone(),
            original_slot: *original_slot,
        });
    }
    glyphs
}

impl ComparisonView {
    /// Computes support rates against the cohort, filters by `thresholds` and
    /// assembles the views. `report` should hold every entry at or above the
    /// score threshold.
    pub fn build(report: &AnomalyReport, cohort: &AlignedCohort, thresholds: Thresholds) -> Result<Self> {
        if report.sequence_id != cohort.anomaly.id {
            return Err(Error::Parameter(format!(
                "report is for {}, cohort for {}",
                report.sequence_id, cohort.anomaly.id
            )));
        }
        let projections = cohort.projections();
        let supported = support_rates_projected(report, &projections)?;
        let filtered = supported.report.filtered(thresholds);
        let n = cohort.anomaly.len();
        let entries: Vec<(usize, AnomalyEntry)> = filtered.entries.into_iter().map(|e| (e.slot, e)).collect();
        let (flow, summaries) = if projections.is_empty() {
            (None, Vec::new())
        } else {
            (Some(build_flow(&projections)?), summarize_slots(&projections)?)
        };
        Ok(ComparisonView {
            anomaly_id: report.sequence_id.clone(),
            cohort: projections.iter().map(|p| p.id.clone()).collect(),
            cohort_size: projections.len(),
            support_unset: supported.support_unset,
            anomaly_slots: cohort
                .anomaly
                .slots
                .iter()
                .enumerate()
                .map(|(i, s)| AnomalySlot {
                    slot: i,
                    span: (i, i),
                    start_time: s.time,
                    end_time: s.time,
                    events: s.events.clone(),
                })
                .collect(),
            glyphs: glyphs_for(n, &entries),
            sequences: projections,
            flow,
            summaries,
        })
    }

    pub fn slots(&self) -> usize {
        self.anomaly_slots.len()
    }
}

/// A view with some slot ranges collapsed. `expand` gives back the view it
/// was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedView {
    pub ranges: Vec<(usize, usize)>,
    pub view: ComparisonView,
    original: ComparisonView,
}

impl MergedView {
    pub fn expand(self) -> ComparisonView {
        self.original
    }

    pub fn original(&self) -> &ComparisonView {
        &self.original
    }
}

/// Merges each inclusive slot range of an unmerged view into one slot.
/// Event sets are unioned, so a sequence contributing an event to several
/// merged slots is counted once.
pub fn merge_slots(view: &ComparisonView, ranges: &[(usize, usize)]) -> Result<MergedView> {
    if view.anomaly_slots.iter().any(|s| s.span.0 != s.span.1) {
        return Err(Error::Parameter("view is already merged".into()));
    }
    let (mapping, spans) = slot_mapping(view.slots(), ranges)?;

    let anomaly_slots = spans
        .iter()
        .enumerate()
        .map(|(i, &(s, e))| {
            let events: BTreeSet<usize> = view.anomaly_slots[s..=e]
                .iter()
                .flat_map(|a| a.events.iter().copied())
                .collect();
            AnomalySlot {
                slot: i,
                span: (s, e),
                start_time: view.anomaly_slots[s].start_time,
                end_time: view.anomaly_slots[e].end_time,
                events: events.into_iter().collect(),
            }
        })
        .collect();

    let mut entries: Vec<(usize, AnomalyEntry)> = view
        .glyphs
        .iter()
        .flat_map(|g| g.events.iter())
        .map(|ge| {
            let mut e = ge.entry.clone();
            e.slot = mapping[ge.original_slot];
            (ge.original_slot, e)
        })
        .collect();
    entries.sort_by(|(oa, a), (ob, b)| {
        b.score
            .total_cmp(&a.score)
            .then(a.slot.cmp(&b.slot))
            .then(a.event.cmp(&b.event))
            .then(oa.cmp(ob))
    });

    let sequences: Vec<ProjectedSequence> = view
        .sequences
        .iter()
        .map(|p| merge_projection(p, &mapping, spans.len()))
        .collect();
    let (flow, summaries) = if sequences.is_empty() {
        (None, Vec::new())
    } else {
        (Some(build_flow(&sequences)?), summarize_slots(&sequences)?)
    };

    Ok(MergedView {
        ranges: spans.iter().copied().filter(|(s, e)| s != e).collect(),
        view: ComparisonView {
            anomaly_id: view.anomaly_id.clone(),
            cohort: view.cohort.clone(),
            cohort_size: view.cohort_size,
            support_unset: view.support_unset,
            glyphs: glyphs_for(spans.len(), &entries),
            anomaly_slots,
            sequences,
            flow,
            summaries,
        },
        original: view.clone(),
    })
}
