use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{
    DetectionRecord, RunStore, CHECKPOINT_FILE, DETECTION_FILE, EMBEDDINGS_FILE, REPORTS_FILE,
};
use crate::analysis::{
    analyze_sequence, detect_anomalies, embed_all, AnomalyReport, DEFAULT_CONTAMINATION, DEFAULT_EVENT_THRESHOLD,
    DEFAULT_LOF_K,
};
use crate::data::{ingest_jsonl_with, Dataset, IngestOptions};
use crate::error::{Error, Result};
use crate::neural::{train_with, Checkpoint, ModelConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    pub tfidf_threshold: Option<f64>,
    pub min_len: usize,
    pub bin_width: Option<f64>,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            tfidf_threshold: None,
            min_len: 2,
            bin_width: None,
        }
    }
}

pub fn preprocess(input: impl AsRef<Path>, options: &PreprocessOptions) -> Result<Dataset> {
    let mut ds = ingest_jsonl_with(
        input,
        IngestOptions {
            bin_width: options.bin_width,
        },
    )?;
    if let Some(t) = options.tfidf_threshold {
        ds = ds.tfidf_filter(t)?;
    }
    ds.drop_short(options.min_len)
}

/// Ingests `input` into a new run directory.
pub fn preprocess_run(
    input: impl AsRef<Path>,
    run: impl AsRef<Path>,
    options: &PreprocessOptions,
    replace: bool,
) -> Result<RunStore> {
    let ds = preprocess(input, options)?;
    RunStore::create(run, &ds, serde_json::to_value(options)?, replace)
}

pub fn train_run(store: &mut RunStore, config: &ModelConfig) -> Result<Checkpoint> {
    let ds = store.dataset()?;
    let (model, log) = train_with(&ds, config, |e| {
        log::info!(
            "epoch {} loss {:.5} (reconstruction {:.5}, kl {:.5}, w_kl {:.3})",
            e.epoch,
            e.loss,
            e.reconstruction,
            e.kl,
            e.w_kl
        )
    })?;
    let ckpt = Checkpoint::new(&model, &ds.vocabulary, &log)?;
    store.put(
        "checkpoint",
        CHECKPOINT_FILE,
        ckpt.to_json()?.as_bytes(),
        "train",
        serde_json::to_value(config)?,
    )?;
    Ok(ckpt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub k: usize,
    pub contamination: f64,
    pub event_threshold: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            k: DEFAULT_LOF_K,
            contamination: DEFAULT_CONTAMINATION,
            event_threshold: DEFAULT_EVENT_THRESHOLD,
        }
    }
}

/// Embeds every sequence, scores it with LOF, selects the anomalies and
/// writes their event-level reports. `k` is capped at N − 1.
pub fn detect_run(store: &mut RunStore, options: &DetectOptions) -> Result<Vec<AnomalyReport>> {
    if !(0.0..=1.0).contains(&options.event_threshold) {
        return Err(Error::Parameter(format!(
            "event threshold must lie in [0, 1], got {}",
            options.event_threshold
        )));
    }
    let ds = store.dataset()?;
    let model = store.checkpoint()?.to_model()?;
    let mut embeddings = embed_all(&model, &ds)?;
    if embeddings.len() < 2 {
        return Err(Error::Parameter("LOF needs at least two sequences".into()));
    }
    let k = options.k.min(embeddings.len() - 1);
    if k != options.k {
        log::warn!("LOF k lowered from {} to {k}", options.k);
    }
    let detection = detect_anomalies(&mut embeddings, k, options.contamination)?;
    let lof: std::collections::HashMap<&str, f64> = embeddings
        .iter()
        .map(|e| (e.sequence_id.as_str(), e.lof_score.unwrap_or(0.0)))
        .collect();
    let reports = detection
        .anomalies
        .iter()
        .map(|id| {
            let seq = ds.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
            analyze_sequence(&model, &ds, seq, lof[id.as_str()], options.event_threshold)
        })
        .collect::<Result<Vec<_>>>()?;

    let step = serde_json::to_value(options)?;
    store.put(
        "embeddings",
        EMBEDDINGS_FILE,
        serde_json::to_string(&embeddings)?.as_bytes(),
        "detect",
        step.clone(),
    )?;
    let record = DetectionRecord {
        detection,
        event_threshold: options.event_threshold,
    };
    store.put(
        "detection",
        DETECTION_FILE,
        serde_json::to_string_pretty(&record)?.as_bytes(),
        "detect",
        step.clone(),
    )?;
    store.put(
        "reports",
        REPORTS_FILE,
        serde_json::to_string_pretty(&reports)?.as_bytes(),
        "detect",
        step,
    )?;
    Ok(reports)
}
