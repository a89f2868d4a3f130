//! Run persistence, the pipeline steps behind the CLI, and the HTTP API.

pub mod api;
pub mod pipeline;
pub mod run;

pub use api::{router, serve, ServiceState};
pub use pipeline::{detect_run, preprocess, preprocess_run, train_run, DetectOptions, PreprocessOptions};
pub use run::{DetectionRecord, Manifest, RunStore};
