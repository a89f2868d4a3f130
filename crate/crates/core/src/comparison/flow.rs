use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::cohort::ProjectedSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowNode {
    pub id: usize,
    pub slot: usize,
    pub event: usize,
    pub population: usize,
    /// Contributing sequence ids, ascending.
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowLink {
    pub source: usize,
    pub target: usize,
    pub population: usize,
    pub mean_gap: f64,
    pub members: Vec<String>,
}

/// Cohort events grouped into (slot, event) nodes, with links between
/// events in adjacent slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub slots: usize,
    pub cohort_size: usize,
    pub nodes: Vec<FlowNode>,
    pub links: Vec<FlowLink>,
}

impl FlowGraph {
    pub fn node(&self, slot: usize, event: usize) -> Option<&FlowNode> {
        self.nodes.iter().find(|n| n.slot == slot && n.event == event)
    }

    pub fn link(&self, from: (usize, usize), to: (usize, usize)) -> Option<&FlowLink> {
        let s = self.node(from.0, from.1)?.id;
        let t = self.node(to.0, to.1)?.id;
        self.links.iter().find(|l| l.source == s && l.target == t)
    }
}

fn check_projections(projections: &[ProjectedSequence]) -> Result<usize> {
    let first = projections
        .first()
        .ok_or_else(|| Error::Parameter("cohort is empty".into()))?;
    let slots = first.slots.len();
    if let Some(p) = projections.iter().find(|p| p.slots.len() != slots) {
        return Err(Error::Shape(format!(
            "projection {} has {} slots, expected {slots}",
            p.id,
            p.slots.len()
        )));
    }
    Ok(slots)
}

/// Builds the flow graph from projections that share one slot axis.
pub fn build_flow(projections: &[ProjectedSequence]) -> Result<FlowGraph> {
    let slots = check_projections(projections)?;

    let mut node_members: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for p in projections {
        for (slot, events) in p.slots.iter().enumerate() {
            for &e in events.keys() {
                node_members.entry((slot, e)).or_default().push(p.id.clone());
            }
        }
    }
    let mut nodes = Vec::with_capacity(node_members.len());
    let mut ids = BTreeMap::new();
    for ((slot, event), mut members) in node_members {
        members.sort();
        ids.insert((slot, event), nodes.len());
        nodes.push(FlowNode {
            id: nodes.len(),
            slot,
            event,
            population: members.len(),
            members,
        });
    }

    let mut link_members: BTreeMap<(usize, usize), Vec<(String, f64)>> = BTreeMap::new();
    for p in projections {
        for slot in 0..slots.saturating_sub(1) {
            for (&a, &ta) in &p.slots[slot] {
                for (&b, &tb) in &p.slots[slot + 1] {
                    let key = (ids[&(slot, a)], ids[&(slot + 1, b)]);
                    link_members
                        .entry(key)
                        .or_default()
                        .push((p.id.clone(), (tb - ta).max(0.0)));
                }
            }
        }
    }
    let links = link_members
        .into_iter()
        .map(|((source, target), mut entries)| {
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mean_gap = entries.iter().map(|e| e.1).sum::<f64>() / entries.len() as f64;
            FlowLink {
                source,
                target,
                population: entries.len(),
                mean_gap,
                members: entries.into_iter().map(|e| e.0).collect(),
            }
        })
        .collect();

    Ok(FlowGraph {
        slots,
        cohort_size: projections.len(),
        nodes,
        links,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSummary {
    pub slot: usize,
    /// Event index to number of cohort sequences holding it at this slot.
    pub counts: BTreeMap<usize, usize>,
    pub cohort_size: usize,
}

pub fn summarize_slots(projections: &[ProjectedSequence]) -> Result<Vec<SlotSummary>> {
    let slots = check_projections(projections)?;
    Ok((0..slots)
        .map(|slot| {
            let mut counts = BTreeMap::new();
            for p in projections {
                for &e in p.slots[slot].keys() {
                    *counts.entry(e).or_insert(0) += 1;
                }
            }
            SlotSummary {
                slot,
                counts,
                cohort_size: projections.len(),
            }
        })
        .collect())
}

/// Unions the slots of each inclusive range into one slot. Earliest
/// timestamps are kept.
pub fn merge_projection(p: &ProjectedSequence, mapping: &[usize], merged_len: usize) -> ProjectedSequence {
    let mut slots = vec![BTreeMap::new(); merged_len];
    for (orig, events) in p.slots.iter().enumerate() {
        let target: &mut BTreeMap<usize, f64> = &mut slots[mapping[orig]];
        for (&e, &t) in events {
            target
                .entry(e)
                .and_modify(|old: &mut f64| *old = old.min(t))
                .or_insert(t);
        }
    }
    ProjectedSequence {
        id: p.id.clone(),
        slots,
    }
}

/// Maps original slot indices onto merged ones. Ranges are inclusive,
/// sorted and non-overlapping.
pub fn slot_mapping(slots: usize, ranges: &[(usize, usize)]) -> Result<(Vec<usize>, Vec<(usize, usize)>)> {
    let mut sorted = ranges.to_vec();
    sorted.sort();
    for &(s, e) in &sorted {
        if s > e || e >= slots {
            return Err(Error::Parameter(format!(
                "invalid slot range [{s}, {e}] for {slots} slots"
            )));
        }
    }
    if sorted.windows(2).any(|w| w[1].0 <= w[0].1) {
        return Err(Error::Parameter("slot ranges overlap".into()));
    }
    let mut mapping = Vec::with_capacity(slots);
    let mut spans = Vec::new();
    let mut next = sorted.iter().peekable();
    let mut i = 0;
    while i < slots {
        let end = match next.peek() {
            Some(&&(s, e)) if s == i => {
                next.next();
                e
            }
            _ => i,
        };
        for _ in i..=end {
            mapping.push(spans.len());
        }
        spans.push((i, end));
        i = end + 1;
    }
    Ok((mapping, spans))
}

/// Distinct events over all slots, used by conservation checks.
pub fn events_held(p: &ProjectedSequence) -> BTreeSet<usize> {
    p.slots.iter().flat_map(|s| s.keys().copied()).collect()
}
