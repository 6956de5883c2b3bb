//! HTTP API over the planning pipeline.
//!
//! | route | |
//! |---|---|
//! | `GET /api/scenes` | scene summaries, ordered by id |
//! | `GET /api/scenes/{id}` | ego history, ground truth, bounds, frame URLs, annotations |
//! | `POST /api/scenes/{id}/plan` | run the pipeline, with or without an instruction |
//! | `GET /frames/...` | camera frames, straight from the manifest directory |
//!
//! Errors are JSON `{"code": ..., "message": ...}`. Plan requests hold one
//! of `max_in_flight` slots for the whole pipeline run; when none is free the
//! request is answered with 409 instead of queueing.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Component, Path};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use instructplan::dataset::{Bounds, EgoState, FrameRef, InstructionAnnotation, Manifest};
use instructplan::kinematics::Point2;
use instructplan::metrics::{self, LengthBucket, Referentiality, StageText};
use instructplan::parser::{ClampCounts, ParseTier};
use instructplan::prompting::{Condition, ConditionKind, PromptStage};
use instructplan::runner::{self, PipelineError, PipelineSettings};
use instructplan::vlm_client::ChatBackend;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown scene `{0}`")]
    SceneNotFound(String),
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("invalid request body: {0}")]
    BadBody(String),
    #[error("a plan is already running; try again when it finishes")]
    Busy,
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::SceneNotFound(_) => StatusCode::NOT_FOUND,
            ApiError::EmptyInstruction => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::BadBody(_) => StatusCode::BAD_REQUEST,
            ApiError::Busy => StatusCode::CONFLICT,
            ApiError::Backend(_) => StatusCode::BAD_GATEWAY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::SceneNotFound(_) => "scene_not_found",
            ApiError::EmptyInstruction => "empty_instruction",
            ApiError::BadBody(_) => "invalid_body",
            ApiError::Busy => "busy",
            ApiError::Backend(_) => "backend_failure",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code().to_owned(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}

/// Shared, read-only server state.
#[derive(Clone)]
pub struct AppState {
    manifest: Arc<Manifest>,
    annotations: Arc<BTreeMap<String, Vec<InstructionAnnotation>>>,
    backend: Arc<dyn ChatBackend>,
    settings: Arc<PipelineSettings>,
    slots: Arc<Semaphore>,
}

impl AppState {
    pub fn new(
        manifest: Manifest,
        annotations: Vec<InstructionAnnotation>,
        backend: Arc<dyn ChatBackend>,
        settings: PipelineSettings,
        max_in_flight: usize,
    ) -> Self {
        let mut by_scene: BTreeMap<String, Vec<InstructionAnnotation>> = BTreeMap::new();
        for a in annotations {
            by_scene.entry(a.scene_id.clone()).or_default().push(a);
        }
        AppState {
            manifest: Arc::new(manifest),
            annotations: Arc::new(by_scene),
            backend,
            settings: Arc::new(settings),
            slots: Arc::new(Semaphore::new(max_in_flight.max(1))),
        }
    }
}

pub fn router(state: AppState) -> Router {
    let frames = ServeDir::new(&state.manifest.base_dir);
    Router::new()
        .route("/api/scenes", get(list_scenes))
        .route("/api/scenes/{id}", get(scene_detail))
        .route("/api/scenes/{id}/plan", post(plan))
        .nest_service("/frames", frames)
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub scene_id: String,
    pub frame_count: usize,
    pub has_ground_truth: bool,
}

async fn list_scenes(State(state): State<AppState>) -> Json<Vec<SceneSummary>> {
    let mut scenes: Vec<SceneSummary> = state
        .manifest
        .scenes
        .iter()
        .map(|s| SceneSummary {
            scene_id: s.scene_id.clone(),
            frame_count: s.frames.len(),
            has_ground_truth: !s.ground_truth.is_empty(),
        })
        .collect();
    scenes.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    Json(scenes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameView {
    pub t: f64,
    /// `None` when the frame lies outside the manifest directory.
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationView {
    pub annotation_id: String,
    pub annotator_id: String,
    pub text: String,
    pub actionable: bool,
    pub refs_static: bool,
    pub refs_dynamic: bool,
    pub referentiality: Referentiality,
    pub word_count: usize,
    pub length_bucket: LengthBucket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDetail {
    pub scene_id: String,
    pub dt_seconds: f64,
    pub horizon: usize,
    pub ego_history: Vec<EgoState>,
    pub ground_truth: Vec<Point2>,
    pub bounds: Bounds,
    pub frames: Vec<FrameView>,
    pub annotations: Vec<AnnotationView>,
}

fn frame_url(manifest: &Manifest, frame: &FrameRef) -> Option<String> {
    let rel = if frame.path.is_absolute() {
        frame.path.strip_prefix(&manifest.base_dir).ok()?
    } else {
        frame.path.as_path()
    };
    url_path(rel).map(|p| format!("/frames/{p}"))
}

fn url_path(rel: &Path) -> Option<String> {
    let mut parts = Vec::new();
    for c in rel.components() {
        match c {
            Component::Normal(s) => parts.push(s.to_str()?.to_owned()),
            Component::CurDir => {}
            _ => return None,
        }
    }
    Some(parts.join("/"))
}

async fn scene_detail(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SceneDetail>, ApiError> {
    let scene = state
        .manifest
        .scene(&id)
        .ok_or_else(|| ApiError::SceneNotFound(id.clone()))?;
    let annotations = state
        .annotations
        .get(&id)
        .into_iter()
        .flatten()
        .map(|a| {
            let words = metrics::word_count(&a.text);
            AnnotationView {
                annotation_id: a.annotation_id.clone(),
                annotator_id: a.annotator_id.clone(),
                text: a.text.clone(),
                actionable: a.actionable,
                refs_static: a.refs_static,
                refs_dynamic: a.refs_dynamic,
                referentiality: a.referentiality(),
                word_count: words,
                length_bucket: LengthBucket::from_word_count(words),
            }
        })
        .collect();
    Ok(Json(SceneDetail {
        scene_id: scene.scene_id.clone(),
        dt_seconds: state.manifest.dt_seconds(),
        horizon: state.manifest.horizon(),
        ego_history: scene.ego_history.clone(),
        ground_truth: scene.ground_truth.clone(),
        bounds: scene.bounds,
        frames: scene
            .frames
            .iter()
            .map(|f| FrameView {
                t: f.t,
                url: frame_url(&state.manifest, f),
            })
            .collect(),
        annotations,
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    #[serde(default)]
    pub instruction: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResponse {
    pub scene_id: String,
    pub condition: ConditionKind,
    pub instruction: Option<String>,
    pub word_count: Option<usize>,
    pub length_bucket: Option<LengthBucket>,
    pub seed: Option<u64>,
    pub backend_id: String,
    /// Exact prompt text sent for every call, re-prompts included.
    pub prompts: Vec<PromptStage>,
    pub stage_texts: Vec<StageText>,
    pub speeds: Vec<f64>,
    pub curvatures: Vec<f64>,
    pub ego_waypoints: Vec<Point2>,
    pub global_waypoints: Vec<Point2>,
    pub ade: f64,
    pub out_of_bounds: bool,
    pub parse_tier: ParseTier,
    pub clamps: ClampCounts,
    pub attempts: u32,
    pub elapsed_seconds: f64,
}

async fn plan(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<PlanResponse>, ApiError> {
    let request: PlanRequest = if body.iter().all(u8::is_ascii_whitespace) {
        PlanRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::BadBody(e.to_string()))?
    };
    if state.manifest.scene(&id).is_none() {
        return Err(ApiError::SceneNotFound(id));
    }
    let condition = match request.instruction {
        None => Condition::Baseline,
        Some(text) if text.trim().is_empty() => return Err(ApiError::EmptyInstruction),
        Some(text) => Condition::Instructed(text.trim().to_owned()),
    };
    let permit = state.slots.clone().try_acquire_owned().map_err(|_| ApiError::Busy)?;

    let mut settings = (*state.settings).clone();
    if request.seed.is_some() {
        settings.seed = request.seed;
    }
    let worker_state = state.clone();
    let run = tokio::task::spawn_blocking(move || {
        let _permit = permit;
        let scene = worker_state.manifest.scene(&id).expect("checked above");
        let run = runner::run_pipeline(
            &worker_state.manifest,
            scene,
            &condition,
            worker_state.backend.as_ref(),
            &settings,
        );
        (id, condition, settings.seed, run)
    })
    .await
    .map_err(|e| ApiError::Internal(format!("pipeline task failed: {e}")))?;
    let (scene_id, condition, seed, run) = run;

    let plan = run.outcome.map_err(|e| match e {
        PipelineError::Input(msg) => ApiError::Internal(msg),
        other => ApiError::Backend(other.to_string()),
    })?;
    let instruction = condition.instruction().map(str::to_owned);
    let word_count = instruction.as_deref().map(metrics::word_count);
    Ok(Json(PlanResponse {
        scene_id,
        condition: condition.kind(),
        length_bucket: word_count.map(LengthBucket::from_word_count),
        word_count,
        instruction,
        seed,
        backend_id: run.backend_id,
        prompts: run.prompts,
        stage_texts: run.stage_texts,
        speeds: plan.parsed.sequence.speeds,
        curvatures: plan.parsed.sequence.curvatures,
        ego_waypoints: plan.ego.points,
        global_waypoints: plan.global.points,
        ade: plan.ade,
        out_of_bounds: plan.out_of_bounds,
        parse_tier: plan.parsed.tier,
        clamps: plan.parsed.clamps,
        attempts: run.trajectory_attempts,
        elapsed_seconds: run.latency_seconds,
    }))
}
