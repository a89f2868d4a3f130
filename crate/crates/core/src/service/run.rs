//! Run directory: the artifacts of one preprocess → train → detect pipeline.
//!
//! ```text
//! run/
//!   manifest.json     version, file names, configs, timestamps
//!   dataset.json      preprocessed dataset
//!   checkpoint.json   trained model
//!   embeddings.json   latent means with LOF scores
//!   detection.json    selected anomalies and detection parameters
//!   reports.json      event-level reports of the selected anomalies
//! ```
//!
//! Every file is written to a temporary name and renamed into place, and
//! the manifest is rewritten last.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{AnomalyReport, Detection, LatentEmbedding};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::neural::Checkpoint;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FILE: &str = "dataset.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.json";
pub const DETECTION_FILE: &str = "detection.json";
pub const REPORTS_FILE: &str = "reports.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub created_at: String,
    pub updated_at: String,
    /// Artifact role (`dataset`, `checkpoint`, ...) to file name.
    pub files: BTreeMap<String, String>,
    /// Parameters of each completed step, keyed by step name.
    pub config: BTreeMap<String, serde_json::Value>,
}

/// Stored alongside the detection so the server can reproduce reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    #[serde(flatten)]
    pub detection: Detection,
    pub event_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
    manifest: Manifest,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Run(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl RunStore {
    /// Creates a run directory holding `dataset`. The directory appears
    /// only once complete. An existing directory is an error unless
    /// `replace` is set.
    pub fn create(root: impl AsRef<Path>, dataset: &Dataset, step_config: serde_json::Value, replace: bool) -> Result<RunStore> {
        let root = root.as_ref().to_path_buf();
        if root.exists() && !replace {
            return Err(Error::Run(format!("{} already exists", root.display())));
        }
        let parent = match root.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let name = root
            .file_name()
            .ok_or_else(|| Error::Run(format!("invalid run path {}", root.display())))?
            .to_string_lossy()
            .to_string();
        let staging = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

        let stamp = now();
        let mut store = RunStore {
            root: staging.clone(),
            manifest: Manifest {
                version: MANIFEST_VERSION,
                created_at: stamp.clone(),
                updated_at: stamp,
                files: BTreeMap::new(),
                config: BTreeMap::new(),
            },
        };
        let result = store
            .put("dataset", DATASET_FILE, dataset.to_json()?.as_bytes(), "preprocess", step_config)
            .and_then(|_| {
                if root.exists() {
                    fs::remove_dir_all(&root).map_err(|e| Error::io(&root, e))?;
                }
                fs::rename(&staging, &root).map_err(|e| Error::io(&root, e))
            });
        if let Err(e) = result {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
        store.root = root;
        Ok(store)
    }

    pub fn open(root: impl AsRef<Path>) -> Result<RunStore> {
        let root = root.as_ref().to_path_buf();
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Run(format!(
                "unsupported manifest version {}",
                manifest.version
            )));
        }
        for file in manifest.files.values() {
            if !root.join(file).is_file() {
                return Err(Error::Run(format!("manifest lists missing file {file}")));
            }
        }
        Ok(RunStore { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn has(&self, role: &str) -> bool {
        self.manifest.files.contains_key(role)
    }

    fn path_of(&self, role: &str) -> Result<PathBuf> {
        let file = self
            .manifest
            .files
            .get(role)
            .ok_or_else(|| Error::Run(format!("run at {} has no {role}", self.root.display())))?;
        Ok(self.root.join(file))
    }

    /// Writes an artifact and records it with the step's parameters.
    pub fn put(&mut self, role: &str, file: &str, bytes: &[u8], step: &str, step_config: serde_json::Value) -> Result<()> {
        write_atomic(&self.root.join(file), bytes)?;
        let mut manifest = self.manifest.clone();
        manifest.files.insert(role.to_string(), file.to_string());
        manifest.config.insert(step.to_string(), step_config);
        manifest.updated_at = now();
        write_atomic(
            &self.root.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest)?.as_bytes(),
        )?;
        self.manifest = manifest;
        Ok(())
    }

    fn read<T: DeserializeOwned>(&self, role: &str) -> Result<T> {
        let path = self.path_of(role)?;
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::load(self.path_of("dataset")?)
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        self.read("checkpoint")
    }

    pub fn embeddings(&self) -> Result<Vec<LatentEmbedding>> {
        self.read("embeddings")
    }

    pub fn detection(&self) -> Result<DetectionRecord> {
        self.read("detection")
    }

    pub fn reports(&self) -> Result<Vec<AnomalyReport>> {
        self.read("reports")
    }
}
