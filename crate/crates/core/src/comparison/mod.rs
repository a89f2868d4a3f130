//! One-to-many comparison of an anomaly against normal sequences: DTW
//! alignment, support rates, flow and summary views.

pub mod cohort;
pub mod dtw;
pub mod flow;
pub mod similar;
pub mod view;

pub use cohort::{
    support_rates, support_rates_projected, supports, AlignedCohort, AlignedMember, ProjectedSequence,
    SupportedReport,
};
pub use dtw::{dtw_align, dtw_sets, jaccard_distance, AlignmentMap};
pub use flow::{build_flow, summarize_slots, FlowGraph, FlowLink, FlowNode, SlotSummary};
pub use similar::{
    max_pairwise_distance, similar_normals, similar_normals_scaled, DistanceHistogram, SimilarNormal,
    SimilarResult, HISTOGRAM_BINS,
};
pub use view::{merge_slots, AnomalySlot, ComparisonView, Glyph, GlyphEvent, MergedView};
