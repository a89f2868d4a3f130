//! Synthetic benchmark data, the kNN-LCS baseline and ROC/PR metrics.

pub mod benchmark;
pub mod knn;
pub mod metrics;
pub mod synthetic;

pub use benchmark::{
    run_benchmark, split_labeled, BenchmarkConfig, BenchmarkReport, LocalizationResult, Method, MethodResult, Split,
};
pub use knn::{flatten, knn_score, lcs_distance, lcs_len, DEFAULT_KNN_K};
pub use metrics::{roc_pr, trapezoid, CurveResult};
pub use synthetic::{
    generate_synthetic, load_labeled_jsonl, parse_labeled_jsonl, Injection, InjectionKind, Label, LabeledDataset,
    Stage, SyntheticConfig, Template,
};
