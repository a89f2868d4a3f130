//! JSON API over a completed run. Schemas for every response live in
//! `schemas/` at the crate root.

use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::run::RunStore;
use crate::analysis::{
    analyze_sequence, mds_project, reconstruction_of, AnomalyReport, LatentEmbedding, Overview, Thresholds,
};
use crate::comparison::{
    max_pairwise_distance, merge_slots, similar_normals_scaled, AlignedCohort, AnomalySlot, ComparisonView,
    FlowGraph, Glyph, ProjectedSequence, SimilarResult, SlotSummary,
};
use crate::data::{Dataset, RawEvent};
use crate::error::Error;
use crate::neural::{ModelParams, ReconstructionMatrix};

pub const DEFAULT_SIMILAR_DISTANCE: f64 = 0.2;
pub const DEFAULT_SIMILAR_LIMIT: usize = 50;

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: &'static str,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            error: "bad_request",
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownId(_) => StatusCode::NOT_FOUND,
            Error::Parameter(_) | Error::Shape(_) | Error::Parse { .. } | Error::Json(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            error: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Cohorts are aligned once per (anomaly, member ids) and reused.
type CohortKey = (String, Vec<String>);

pub struct ServiceState {
    dataset: Dataset,
    model: ModelParams,
    embeddings: Vec<LatentEmbedding>,
    index: HashMap<String, usize>,
    anomalies: Vec<String>,
    anomaly_set: HashSet<String>,
    overview: Overview,
    scale: f64,
    thresholds: RwLock<Thresholds>,
    cohorts: RwLock<HashMap<CohortKey, Arc<AlignedCohort>>>,
}

impl ServiceState {
    /// `embeddings` must carry LOF scores; `anomalies` are in detection order.
    pub fn new(
        dataset: Dataset,
        model: ModelParams,
        embeddings: Vec<LatentEmbedding>,
        anomalies: Vec<String>,
    ) -> crate::Result<Self> {
        crate::neural::checkpoint::check_fingerprint(&model, &dataset.vocabulary)?;
        let index: HashMap<String, usize> = embeddings
            .iter()
            .enumerate()
            .map(|(i, e)| (e.sequence_id.clone(), i))
            .collect();
        for id in anomalies.iter().chain(dataset.sequences.iter().map(|s| &s.id)) {
            if !index.contains_key(id) {
                return Err(Error::UnknownId(id.clone()));
            }
        }
        let overview = mds_project(&embeddings)?;
        let scale = max_pairwise_distance(&embeddings);
        Ok(ServiceState {
            anomaly_set: anomalies.iter().cloned().collect(),
            dataset,
            model,
            embeddings,
            index,
            anomalies,
            overview,
            scale,
            thresholds: RwLock::new(Thresholds::default()),
            cohorts: RwLock::new(HashMap::new()),
        })
    }

    pub fn from_run(store: &RunStore) -> crate::Result<Self> {
        let dataset = store.dataset()?;
        let model = store.checkpoint()?.to_model()?;
        let embeddings = store.embeddings()?;
        let detection = store.detection()?;
        ServiceState::new(dataset, model, embeddings, detection.detection.anomalies)
    }

    pub fn thresholds(&self) -> Thresholds {
        *self.thresholds.read().expect("threshold lock poisoned")
    }

    fn embedding(&self, id: &str) -> Result<&LatentEmbedding, ApiError> {
        self.index
            .get(id)
            .map(|&i| &self.embeddings[i])
            .ok_or_else(|| Error::UnknownId(id.to_string()).into())
    }

    /// Every cell of the sequence as an entry, before any threshold.
    fn full_report(&self, id: &str) -> Result<AnomalyReport, ApiError> {
        let emb = self.embedding(id)?;
        let seq = self
            .dataset
            .get(id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))?;
        Ok(analyze_sequence(
            &self.model,
            &self.dataset,
            seq,
            emb.lof_score.unwrap_or(0.0),
            0.0,
        )?)
    }

    fn cohort(&self, anomaly: &str, ids: &[String]) -> Result<Arc<AlignedCohort>, ApiError> {
        let mut members = ids.to_vec();
        members.sort();
        members.dedup();
        let key = (anomaly.to_string(), members);
        if let Some(c) = self.cohorts.read().expect("cohort lock poisoned").get(&key) {
            return Ok(c.clone());
        }
        let seq = self
            .dataset
            .get(anomaly)
            .ok_or_else(|| Error::UnknownId(anomaly.to_string()))?;
        let normals = key
            .1
            .iter()
            .map(|id| self.dataset.get(id).ok_or_else(|| Error::UnknownId(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let cohort = Arc::new(AlignedCohort::align(seq, &normals)?);
        self.cohorts
            .write()
            .expect("cohort lock poisoned")
            .insert(key, cohort.clone());
        Ok(cohort)
    }
}

#[derive(Debug, Serialize)]
pub struct OverviewResponse<'a> {
    pub points: &'a [crate::analysis::OverviewPoint],
    pub rank_deficient: bool,
    pub anomalies: &'a [String],
}

#[derive(Debug, Serialize)]
pub struct AnomalySummary {
    pub sequence_id: String,
    pub lof_score: f64,
    pub sequence_length: usize,
    pub entry_count: usize,
    pub max_score: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct AnomalyList {
    pub thresholds: Thresholds,
    pub anomalies: Vec<AnomalySummary>,
}

#[derive(Debug, Serialize)]
pub struct SequenceSlot {
    pub time: f64,
    pub events: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct AnomalyDetail {
    pub report: AnomalyReport,
    pub is_anomaly: bool,
    pub sequence_length: usize,
    pub slots: Vec<SequenceSlot>,
    pub events: Vec<RawEvent>,
}

#[derive(Debug, Serialize)]
pub struct ReconstructionResponse {
    pub sequence_id: String,
    pub event_names: Vec<String>,
    pub reconstruction: ReconstructionMatrix,
}

#[derive(Debug, Serialize)]
pub struct RawResponse {
    pub sequence_id: String,
    pub events: Vec<RawEvent>,
}

#[derive(Debug, Serialize)]
pub struct VocabularyResponse {
    pub events: Vec<String>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Serialize)]
pub struct ThresholdResponse {
    pub thresholds: Thresholds,
    pub reports: Vec<AnomalyReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Sequence,
    Flow,
    Summary,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonRequest {
    pub cohort: Vec<String>,
    pub granularity: Granularity,
    #[serde(default)]
    pub merged: Vec<(usize, usize)>,
    #[serde(default)]
    pub thresholds: Option<ThresholdBody>,
}

#[derive(Debug, Serialize)]
pub struct ComparisonResponse {
    pub anomaly_id: String,
    pub granularity: Granularity,
    pub thresholds: Thresholds,
    pub cohort: Vec<String>,
    pub cohort_size: usize,
    pub support_unset: bool,
    pub merged: Vec<(usize, usize)>,
    pub anomaly_slots: Vec<AnomalySlot>,
    pub glyphs: Vec<Glyph>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequences: Option<Vec<ProjectedSequence>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowGraph>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summaries: Option<Vec<SlotSummary>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdBody {
    pub anomaly_score: f64,
    pub support_rate: f64,
}

impl ThresholdBody {
    fn validate(self) -> Result<Thresholds, ApiError> {
        Thresholds::new(self.anomaly_score, self.support_rate).map_err(ApiError::from)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdQuery {
    pub anomaly_score: Option<f64>,
    pub support_rate: Option<f64>,
}

impl ThresholdQuery {
    fn resolve(&self, state: &ServiceState) -> Result<Thresholds, ApiError> {
        let base = state.thresholds();
        Thresholds::new(
            self.anomaly_score.unwrap_or(base.anomaly_score),
            self.support_rate.unwrap_or(base.support_rate),
        )
        .map_err(ApiError::from)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarQuery {
    pub max_distance: Option<f64>,
    pub limit: Option<usize>,
}

type Shared = Arc<ServiceState>;

async fn overview(State(s): State<Shared>) -> Json<serde_json::Value> {
    Json(
        serde_json::to_value(OverviewResponse {
            points: &s.overview.points,
            rank_deficient: s.overview.rank_deficient,
            anomalies: &s.anomalies,
        })
        .expect("overview serializes"),
    )
}

async fn list_anomalies(
    State(s): State<Shared>,
    query: Result<Query<ThresholdQuery>, QueryRejection>,
) -> ApiResult<AnomalyList> {
    let thresholds = query?.resolve(&s)?;
    let anomalies = s
        .anomalies
        .iter()
        .map(|id| {
            let report = s.full_report(id)?.filtered(thresholds);
            Ok(AnomalySummary {
                sequence_id: id.clone(),
                lof_score: report.lof_score,
                sequence_length: s.embedding(id)?.length,
                entry_count: report.entries.len(),
                max_score: report.entries.first().map(|e| e.score),
            })
        })
        .collect::<Result<Vec<_>, ApiError>>()?;
    Ok(Json(AnomalyList { thresholds, anomalies }))
}

async fn anomaly_detail(
    State(s): State<Shared>,
    Path(id): Path<String>,
    query: Result<Query<ThresholdQuery>, QueryRejection>,
) -> ApiResult<AnomalyDetail> {
    let thresholds = query?.resolve(&s)?;
    let report = s.full_report(&id)?.filtered(thresholds);
    let seq = s.dataset.get(&id).ok_or_else(|| Error::UnknownId(id.clone()))?;
    let vocab = &s.dataset.vocabulary;
    Ok(Json(AnomalyDetail {
        report,
        is_anomaly: s.anomaly_set.contains(&id),
        sequence_length: seq.len(),
        slots: seq
            .slots
            .iter()
            .map(|slot| SequenceSlot {
                time: slot.time,
                events: slot
                    .events
                    .iter()
                    .map(|&e| vocab.name(e).unwrap_or_default().to_string())
                    .collect(),
            })
            .collect(),
        events: seq.raw_events(vocab),
    }))
}

async fn reconstruction(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<ReconstructionResponse> {
    let seq = s.dataset.get(&id).ok_or_else(|| Error::UnknownId(id.clone()))?;
    let recon = reconstruction_of(&s.model, &s.dataset, seq)?;
    Ok(Json(ReconstructionResponse {
        sequence_id: id,
        event_names: s.dataset.vocabulary.names().into_iter().map(String::from).collect(),
        reconstruction: recon,
    }))
}

async fn similar(
    State(s): State<Shared>,
    Path(id): Path<String>,
    query: Result<Query<SimilarQuery>, QueryRejection>,
) -> ApiResult<SimilarResult> {
    let Query(q) = query?;
    let anomalies: HashSet<&str> = s.anomaly_set.iter().map(String::as_str).collect();
    let result = similar_normals_scaled(
        &id,
        &s.embeddings,
        &anomalies,
        s.scale,
        q.max_distance.unwrap_or(DEFAULT_SIMILAR_DISTANCE),
        q.limit.unwrap_or(DEFAULT_SIMILAR_LIMIT),
    )?;
    Ok(Json(result))
}

async fn comparison(
    State(s): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<ComparisonRequest>, JsonRejection>,
) -> ApiResult<ComparisonResponse> {
    let Json(req) = body?;
    s.embedding(&id)?;
    if req.cohort.is_empty() {
        return Err(ApiError::bad_request("cohort must name at least one sequence"));
    }
    if req.cohort.iter().any(|c| *c == id) {
        return Err(ApiError::bad_request("cohort must not contain the anomaly itself"));
    }
    let thresholds = match req.thresholds {
        Some(t) => t.validate()?,
        None => s.thresholds(),
    };
    let cohort = s.cohort(&id, &req.cohort)?;
    let report = s.full_report(&id)?;
    let mut view = ComparisonView::build(&report, &cohort, thresholds)?;
    let mut merged = Vec::new();
    if !req.merged.is_empty() {
        let m = merge_slots(&view, &req.merged)?;
        merged = m.ranges.clone();
        view = m.view;
    }
    let g = req.granularity;
    Ok(Json(ComparisonResponse {
        anomaly_id: id,
        granularity: g,
        thresholds,
        cohort: view.cohort,
        cohort_size: view.cohort_size,
        support_unset: view.support_unset,
        merged,
        anomaly_slots: view.anomaly_slots,
        glyphs: view.glyphs,
        sequences: (g == Granularity::Sequence).then_some(view.sequences),
        flow: if g == Granularity::Flow { view.flow } else { None },
        summaries: (g == Granularity::Summary).then_some(view.summaries),
    }))
}

async fn get_thresholds(State(s): State<Shared>) -> Json<Thresholds> {
    Json(s.thresholds())
}

async fn put_thresholds(
    State(s): State<Shared>,
    body: Result<Json<ThresholdBody>, JsonRejection>,
) -> ApiResult<ThresholdResponse> {
    let Json(b) = body?;
    let thresholds = b.validate()?;
    *s.thresholds.write().expect("threshold lock poisoned") = thresholds;
    let reports = s
        .anomalies
        .iter()
        .map(|id| Ok(s.full_report(id)?.filtered(thresholds)))
        .collect::<Result<Vec<_>, ApiError>>()?;
    Ok(Json(ThresholdResponse { thresholds, reports }))
}

async fn raw_sequence(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<RawResponse> {
    let seq = s.dataset.get(&id).ok_or_else(|| Error::UnknownId(id.clone()))?;
    Ok(Json(RawResponse {
        events: seq.raw_events(&s.dataset.vocabulary),
        sequence_id: id,
    }))
}

async fn vocabulary(State(s): State<Shared>) -> Json<VocabularyResponse> {
    let v = &s.dataset.vocabulary;
    Json(VocabularyResponse {
        events: v.names().into_iter().map(String::from).collect(),
        counts: v.counts(),
    })
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        error: "not_found",
        message: "no such endpoint".into(),
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/overview", get(overview))
        .route("/api/vocabulary", get(vocabulary))
        .route("/api/anomalies", get(list_anomalies))
        .route("/api/anomalies/{id}", get(anomaly_detail))
        .route("/api/anomalies/{id}/reconstruction", get(reconstruction))
        .route("/api/anomalies/{id}/similar", get(similar))
        .route("/api/anomalies/{id}/comparison", post(comparison))
        .route("/api/thresholds", get(get_thresholds).put(put_thresholds))
        .route("/api/sequences/{id}/raw", get(raw_sequence))
        .fallback(not_found)
        .with_state(state)
}

pub async fn serve(state: Arc<ServiceState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
