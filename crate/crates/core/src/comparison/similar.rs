use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::analysis::{euclidean, LatentEmbedding};
use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarNormal {
    pub sequence_id: String,
    pub distance: f64,
}

/// Equal-width bins over [0, 1]; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl DistanceHistogram {
    pub fn new(distances: impl IntoIterator<Item = f64>, bins: usize) -> Self {
        let mut counts = vec![0; bins];
        for d in distances {
            let b = ((d * bins as f64).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        DistanceHistogram {
            edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarResult {
    pub anomaly_id: String,
    pub max_distance: f64,
    /// Largest pairwise latent distance in the dataset, used for scaling.
    pub scale: f64,
    pub normals: Vec<SimilarNormal>,
    /// Distances of every normal sequence, before the cutoff.
    pub histogram: DistanceHistogram,
}

pub fn max_pairwise_distance(embeddings: &[LatentEmbedding]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..embeddings.len() {
        for j in (i + 1)..embeddings.len() {
            best = best.max(euclidean(&embeddings[i].mu, &embeddings[j].mu));
        }
    }
    best
}

/// Normal sequences near an anomaly in latent space. Distances are divided
/// by `scale` (normally [`max_pairwise_distance`]) so they fall in [0, 1].
pub fn similar_normals_scaled(
    anomaly_id: &str,
    embeddings: &[LatentEmbedding],
    anomalies: &HashSet<&str>,
    scale: f64,
    max_distance: f64,
    limit: usize,
) -> Result<SimilarResult> {
    if !(0.0..=1.0).contains(&max_distance) {
        return Err(Error::Parameter(format!(
            "max_distance must lie in [0, 1], got {max_distance}"
        )));
    }
    let query = embeddings
        .iter()
        .find(|e| e.sequence_id == anomaly_id)
        .ok_or_else(|| Error::UnknownId(anomaly_id.to_string()))?;
    let mut all: Vec<SimilarNormal> = embeddings
        .iter()
        .filter(|e| e.sequence_id != anomaly_id && !anomalies.contains(e.sequence_id.as_str()))
        .map(|e| {
            let d = euclidean(&query.mu, &e.mu);
            SimilarNormal {
                sequence_id: e.sequence_id.clone(),
                distance: if scale > 0.0 { (d / scale).min(1.0) } else { 0.0 },
            }
        })
        .collect();
    let histogram = DistanceHistogram::new(all.iter().map(|s| s.distance), HISTOGRAM_BINS);
    all.retain(|s| s.distance <= max_distance);
    all.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.sequence_id.cmp(&b.sequence_id))
    });
    all.truncate(limit);
    Ok(SimilarResult {
        anomaly_id: anomaly_id.to_string(),
        max_distance,
        scale,
        normals: all,
        histogram,
    })
}

pub fn similar_normals(
    anomaly_id: &str,
    embeddings: &[LatentEmbedding],
    anomalies: &HashSet<&str>,
    max_distance: f64,
    limit: usize,
) -> Result<SimilarResult> {
    let scale = max_pairwise_distance(embeddings);
    similar_normals_scaled(anomaly_id, embeddings, anomalies, scale, max_distance, limit)
}
