//! Sequence-level detection (LOF over latent means), event-level
//! localization, and the 2-D overview projection.

pub mod localize;
pub mod lof;
pub mod mds;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use localize::{localize_events, sort_entries, AnomalyEntry, AnomalyKind, DEFAULT_EVENT_THRESHOLD};
pub use lof::{euclidean, lof_scores, LRD_CAP};
pub use mds::{classical_mds, Mds};

use crate::data::{encode_multihot, Dataset, EventSequence};
use crate::error::{Error, Result};
use crate::neural::checkpoint::check_fingerprint;
use crate::neural::{decode, encode, ModelParams, ReconstructionMatrix};

pub const DEFAULT_LOF_K: usize = 20;
pub const DEFAULT_CONTAMINATION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentEmbedding {
    pub sequence_id: String,
    pub mu: Vec<f64>,
    pub length: usize,
    pub lof_score: Option<f64>,
}

/// Latent mean of every sequence, in dataset order.
pub fn embed_all(model: &ModelParams, dataset: &Dataset) -> Result<Vec<LatentEmbedding>> {
    check_fingerprint(model, &dataset.vocabulary)?;
    dataset
        .sequences
        .par_iter()
        .map(|s| {
            let x = encode_multihot(s, &dataset.vocabulary)?;
            let stats = encode(model, &x)?;
            Ok(LatentEmbedding {
                sequence_id: s.id.clone(),
                mu: stats.mu,
                length: s.len(),
                lof_score: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub k: usize,
    pub contamination: f64,
    /// Ids of the selected sequences, highest LOF first.
    pub anomalies: Vec<String>,
}

/// Number of sequences selected at a contamination fraction.
pub fn contamination_count(contamination: f64, n: usize) -> Result<usize> {
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(Error::Parameter(format!(
            "contamination must lie in (0, 1), got {contamination}"
        )));
    }
    let raw = contamination * n as f64;
    if raw < 1.0 - 1e-9 {
        return Err(Error::Parameter(format!(
            "contamination {contamination} selects no sequence out of {n}"
        )));
    }
    // Tolerate representation error such as 0.07 * 100 = 7.000000000000001.
    Ok(((raw - 1e-9).ceil() as usize).min(n))
}

/// Top `⌈contamination·N⌉` ids by score, ties broken by ascending id.
pub fn select_top(ids: &[&str], scores: &[f64], contamination: f64) -> Result<Vec<String>> {
    let count = contamination_count(contamination, ids.len())?;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(ids[a].cmp(ids[b])));
    Ok(order[..count].iter().map(|&i| ids[i].to_string()).collect())
}

/// Fills in LOF scores and selects the anomalous fraction.
pub fn detect_anomalies(
    embeddings: &mut [LatentEmbedding],
    k: usize,
    contamination: f64,
) -> Result<Detection> {
    if embeddings.len() < k + 1 {
        return Err(Error::Parameter(format!(
            "need more than k={k} sequences for LOF, got {}",
            embeddings.len()
        )));
    }
    let points: Vec<Vec<f64>> = embeddings.iter().map(|e| e.mu.clone()).collect();
    let scores = lof_scores(&points, k)?;
    for (e, s) in embeddings.iter_mut().zip(&scores) {
        e.lof_score = Some(*s);
    }
    let ids: Vec<&str> = embeddings.iter().map(|e| e.sequence_id.as_str()).collect();
    let anomalies = select_top(&ids, &scores, contamination)?;
    Ok(Detection {
        k,
        contamination,
        anomalies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub anomaly_score: f64,
    pub support_rate: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            anomaly_score: DEFAULT_EVENT_THRESHOLD,
            support_rate: 0.0,
        }
    }
}

impl Thresholds {
    pub fn new(anomaly_score: f64, support_rate: f64) -> Result<Self> {
        for (name, v) in [("anomaly_score", anomaly_score), ("support_rate", support_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Thresholds {
            anomaly_score,
            support_rate,
        })
    }

    /// Whether an entry survives both thresholds. Entries without a support
    /// rate are only tested against the score threshold.
    pub fn keeps(&self, entry: &AnomalyEntry) -> bool {
        entry.score >= self.anomaly_score
            && entry.support_rate.is_none_or(|r| r >= self.support_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub sequence_id: String,
    pub lof_score: f64,
    pub thresholds: Thresholds,
    pub entries: Vec<AnomalyEntry>,
}

impl AnomalyReport {
    /// Re-filters a report computed at a lower threshold.
    pub fn filtered(&self, thresholds: Thresholds) -> AnomalyReport {
        AnomalyReport {
            sequence_id: self.sequence_id.clone(),
            lof_score: self.lof_score,
            thresholds,
            entries: self
                .entries
                .iter()
                .filter(|e| thresholds.keeps(e))
                .cloned()
                .collect(),
        }
    }
}

/// Deterministic reconstruction of a sequence from its latent mean.
pub fn reconstruction_of(
    model: &ModelParams,
    dataset: &Dataset,
    sequence: &EventSequence,
) -> Result<ReconstructionMatrix> {
    let x = encode_multihot(sequence, &dataset.vocabulary)?;
    let stats = encode(model, &x)?;
    decode(model, &stats.mu, x.rows())
}

/// Builds the event-level report for one sequence.
pub fn analyze_sequence(
    model: &ModelParams,
    dataset: &Dataset,
    sequence: &EventSequence,
    lof_score: f64,
    event_threshold: f64,
) -> Result<AnomalyReport> {
    let x = encode_multihot(sequence, &dataset.vocabulary)?;
    let recon = reconstruction_of(model, dataset, sequence)?;
    let entries = localize_events(&x, &recon, event_threshold)?;
    Ok(AnomalyReport {
        sequence_id: sequence.id.clone(),
        lof_score,
        thresholds: Thresholds {
            anomaly_score: event_threshold,
            support_rate: 0.0,
        },
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverviewPoint {
    pub sequence_id: String,
    pub xy: [f64; 2],
    pub lof_score: f64,
    pub sequence_length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overview {
    pub points: Vec<OverviewPoint>,
    pub rank_deficient: bool,
}

/// MDS of the latent means. Embeddings without a LOF score report 0.
pub fn mds_project(embeddings: &[LatentEmbedding]) -> Result<Overview> {
    let points: Vec<Vec<f64>> = embeddings.iter().map(|e| e.mu.clone()).collect();
    let mds = classical_mds(&points)?;
    Ok(Overview {
        points: embeddings
            .iter()
            .zip(&mds.coords)
            .map(|(e, xy)| OverviewPoint {
                sequence_id: e.sequence_id.clone(),
                xy: *xy,
                lof_score: e.lof_score.unwrap_or(0.0),
                sequence_length: e.length,
            })
            .collect(),
        rank_deficient: mds.rank_deficient,
    })
}

/// Index from id to position, for callers that look up embeddings often.
pub fn index_by_id(embeddings: &[LatentEmbedding]) -> HashMap<&str, usize> {
    embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| (e.sequence_id.as_str(), i))
        .collect()
}
