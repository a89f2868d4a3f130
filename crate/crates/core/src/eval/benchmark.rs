use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::{flatten, knn_score_flat, DEFAULT_KNN_K};
use super::metrics::{roc_pr, CurveResult};
use super::synthetic::{InjectionKind, LabeledDataset};
use crate::analysis::{
    analyze_sequence, embed_all, select_top, AnomalyKind, DEFAULT_CONTAMINATION, DEFAULT_EVENT_THRESHOLD,
    DEFAULT_LOF_K,
};
use crate::analysis::lof::lof_scores;
use crate::error::{Error, Result};
use crate::neural::{seeded_rng, train, ModelConfig, TrainingLog};

const SPLIT_STREAM: u64 = 0x5851_f42d_4c95_7f2d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// LOF over VAE latent means.
    #[serde(rename = "VA")]
    Va,
    /// Mean LCS distance to the nearest training sequences.
    #[serde(rename = "kNN")]
    Knn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Va => "VA",
            Method::Knn => "kNN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub model: ModelConfig,
    pub lof_k: usize,
    pub knn_k: usize,
    pub contamination: f64,
    pub event_threshold: f64,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub methods: Vec<Method>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            model: ModelConfig::default(),
            lof_k: DEFAULT_LOF_K,
            knn_k: DEFAULT_KNN_K,
            contamination: DEFAULT_CONTAMINATION,
            event_threshold: DEFAULT_EVENT_THRESHOLD,
            train_fraction: 0.8,
            split_seed: 0,
            methods: vec![Method::Va, Method::Knn],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Normals are shuffled and divided by `train_fraction`; every anomaly goes
/// to the test side. Both sides are returned in id order.
pub fn split_labeled(labeled: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut normals: Vec<String> = labeled
        .dataset
        .sequences
        .iter()
        .filter(|s| !labeled.is_anomalous(&s.id))
        .map(|s| s.id.clone())
        .collect();
    normals.sort();
    normals.shuffle(&mut seeded_rng(seed ^ SPLIT_STREAM));
    let n_train = (normals.len() as f64 * train_fraction).round() as usize;
    let mut train = normals[..n_train].to_vec();
    let mut test: Vec<String> = normals[n_train..].to_vec();
    test.extend(labeled.anomalous_ids().into_iter().map(String::from));
    train.sort();
    test.sort();
    Ok(Split { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub curve: CurveResult,
    /// Test sequence ids and scores in the order used for the curve.
    pub scores: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub threshold: f64,
    /// Detected sequences that are truly anomalous.
    pub detected_anomalies: usize,
    pub insertions: usize,
    pub recovered: usize,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub n_test_anomalies: usize,
    pub methods: Vec<MethodResult>,
    pub localization: Option<LocalizationResult>,
    pub training: Option<TrainingLog>,
}

impl BenchmarkReport {
    pub fn auc(&self, method: Method) -> Option<f64> {
        self.methods.iter().find(|m| m.method == method).map(|m| m.curve.auc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per curve point and method.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "threshold", "tpr", "fpr", "precision", "recall"])
            .map_err(csv_err)?;
        for m in &self.methods {
            let c = &m.curve;
            for i in 0..c.len() {
                let t = c.thresholds[i].map(|t| t.to_string()).unwrap_or_default();
                w.write_record([
                    m.method.name().to_string(),
                    t,
                    c.tpr[i].to_string(),
                    c.fpr[i].to_string(),
                    c.precision[i].to_string(),
                    c.recall[i].to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Parameter(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parameter(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parameter(format!("csv: {e}"))
}

/// Trains on the normal-only training split and scores the test split.
///
/// VA scores each test sequence by its LOF among the latent means of all
/// sequences (train and test). kNN scores it by mean LCS distance to the
/// training sequences. Localization recall counts injected insertions that
/// show up as redundant entries in detected true anomalies.
pub fn run_benchmark(labeled: &LabeledDataset, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let split = split_labeled(labeled, config.train_fraction, config.split_seed)?;
    let test_labels: Vec<bool> = split.test.iter().map(|id| labeled.is_anomalous(id)).collect();
    let dataset = &labeled.dataset;

    let mut methods = Vec::new();
    let mut localization = None;
    let mut training = None;
    for &method in &config.methods {
        match method {
            Method::Va => {
                let train_ids: Vec<&str> = split.train.iter().map(String::as_str).collect();
                let train_set = dataset.subset(&train_ids)?;
                let (model, log) = train(&train_set, &config.model)?;
                training = Some(log);

                let embeddings = embed_all(&model, dataset)?;
                let points: Vec<Vec<f64>> = embeddings.iter().map(|e| e.mu.clone()).collect();
                let lof = lof_scores(&points, config.lof_k)?;
                let by_id: HashMap<&str, f64> = embeddings
                    .iter()
                    .zip(&lof)
                    .map(|(e, &s)| (e.sequence_id.as_str(), s))
                    .collect();
                let scores: Vec<f64> = split.test.iter().map(|id| by_id[id.as_str()]).collect();
                methods.push(result(method, &split.test, scores, &test_labels)?);

                let ids: Vec<&str> = embeddings.iter().map(|e| e.sequence_id.as_str()).collect();
                let detected = select_top(&ids, &lof, config.contamination)?;
                let mut loc = LocalizationResult {
                    threshold: config.event_threshold,
                    detected_anomalies: 0,
                    insertions: 0,
                    recovered: 0,
                    recall: None,
                };
                for id in detected.iter().filter(|id| labeled.is_anomalous(id)) {
                    loc.detected_anomalies += 1;
                    let seq = dataset.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
                    let report = analyze_sequence(&model, dataset, seq, by_id[id.as_str()], config.event_threshold)?;
                    let notes = labeled.annotations.get(id).map(Vec::as_slice).unwrap_or(&[]);
                    for inj in notes.iter().filter(|n| n.kind == InjectionKind::Insert) {
                        loc.insertions += 1;
                        let hit = report.entries.iter().any(|e| {
                            e.slot == inj.slot && e.event == inj.event && e.kind == AnomalyKind::Redundant
                        });
                        if hit {
                            loc.recovered += 1;
                        }
                    }
                }
                if loc.insertions > 0 {
                    loc.recall = Some(loc.recovered as f64 / loc.insertions as f64);
                }
                localization = Some(loc);
            }
            Method::Knn => {
                let train_flat: Vec<Vec<usize>> = split
                    .train
                    .iter()
                    .map(|id| dataset.get(id).map(flatten).ok_or_else(|| Error::UnknownId(id.clone())))
                    .collect::<Result<_>>()?;
                let scores = split
                    .test
                    .par_iter()
                    .map(|id| {
                        let s = dataset.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
                        knn_score_flat(&flatten(s), &train_flat, config.knn_k)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                methods.push(result(method, &split.test, scores, &test_labels)?);
            }
        }
    }

    Ok(BenchmarkReport {
        config: config.clone(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        n_test_anomalies: test_labels.iter().filter(|&&l| l).count(),
        methods,
        localization,
        training,
    })
}

fn result(method: Method, ids: &[String], scores: Vec<f64>, labels: &[bool]) -> Result<MethodResult> {
    Ok(MethodResult {
        method,
        curve: roc_pr(&scores, labels)?,
        scores: ids.iter().cloned().zip(scores).collect(),
    })
}
