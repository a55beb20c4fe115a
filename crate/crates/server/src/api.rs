//! HTTP routes. Every mutation goes through the engine, which serializes
//! commands per mission; reads use engine snapshots and never block writers.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::{mpsc, Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;
use wedo_core::mission::{Hashtag, MissionError, VoteKind};
use wedo_core::persistence::StoreError;
use wedo_core::scheduler::Clock;
use wedo_core::transport::{SimulatedFeed, TransportEvent, WebhookAdapter};
use wedo_core::view::{self, MissionView};
use wedo_core::{Engine, EngineError, IdeaId, MissionId, MissionSpec, ParticipantId, Phase, Timestamp};

const PLACEHOLDER_PAGE: &str = include_str!("../static/index.html");

/// Where `POST /inbound` delivers observations.
#[derive(Clone)]
pub enum Inbound {
    Sim(SimulatedFeed),
    Webhook(Arc<WebhookAdapter>),
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub clock: Arc<dyn Clock>,
    pub inbound: Inbound,
    /// Nudges the scheduler loop after inbound traffic, if one is running.
    pub wake: Option<Arc<Mutex<mpsc::Sender<()>>>>,
}

impl AppState {
    fn now(&self) -> Timestamp {
        self.clock.now()
    }

    fn nudge(&self) {
        if let Some(w) = &self.wake {
            let _ = w.lock().unwrap().send(());
        }
    }
}

/// An error response: `{"error": <code>, "message": <text>}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

fn status_of(e: &EngineError) -> StatusCode {
    match e {
        EngineError::NotFound(_) | EngineError::Store(StoreError::NotFound(_)) => StatusCode::NOT_FOUND,
        EngineError::Store(StoreError::SequenceConflict { .. }) | EngineError::DuplicateHashtag(_) => {
            StatusCode::CONFLICT
        }
        EngineError::KickoffTooLong { .. } => StatusCode::PAYLOAD_TOO_LARGE,
        EngineError::Mission(MissionError::SequenceGap { .. }) => StatusCode::CONFLICT,
        EngineError::Mission(_) | EngineError::InvalidKickoff | EngineError::Protocol(_) => {
            StatusCode::BAD_REQUEST
        }
        EngineError::Transport(_) | EngineError::Crashed => StatusCode::SERVICE_UNAVAILABLE,
        EngineError::Store(_) | EngineError::Template(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = status_of(&e);
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<MissionError> for ApiError {
    fn from(e: MissionError) -> Self {
        EngineError::from(e).into()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses a JSON body, answering 400 rather than axum's 422 on bad input.
fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "MalformedRequest", e.to_string()))
}

fn mission_id(raw: &str) -> ApiResult<MissionId> {
    raw.parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("mission {raw} not found")))
}

/// Runs an engine call off the async workers; appends fsync.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, EngineError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct CreateMission {
    name: String,
    #[serde(default)]
    rationale: String,
    hashtag: String,
    selection_deadline: Timestamp,
    execution_time: Timestamp,
    creator: ParticipantId,
    /// Edited kickoff; the suggestion is used when absent.
    #[serde(default)]
    kickoff_text: Option<String>,
    /// Only compute the suggested kickoff.
    #[serde(default)]
    dry_run: bool,
}

#[derive(Serialize)]
struct CreatedBody {
    #[serde(flatten)]
    view: MissionView,
    suggested_kickoff: String,
}

#[derive(Serialize)]
struct DryRunBody {
    suggested_kickoff: String,
    length: usize,
}

async fn create_mission(State(app): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateMission = parse(&body)?;
    let spec = MissionSpec {
        name: req.name,
        rationale: req.rationale,
        hashtag: Hashtag::parse(&req.hashtag)?,
        selection_deadline: req.selection_deadline,
        execution_time: req.execution_time,
        creator: req.creator,
    };
    let now = app.now();
    let engine = app.engine.clone();
    if req.dry_run {
        let text = blocking(move || engine.suggest_kickoff(spec, now)).await?;
        let length = wedo_core::protocol::nfc_len(&text);
        return Ok(Json(DryRunBody {
            suggested_kickoff: text,
            length,
        })
        .into_response());
    }
    let created = blocking(move || engine.create(spec, req.kickoff_text, now)).await?;
    let body = CreatedBody {
        view: view::build_view(&created.state, app.now()),
        suggested_kickoff: created.suggested_kickoff,
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn list_missions(State(app): State<AppState>) -> Json<Vec<view::MissionSummary>> {
    let now = app.now();
    let mut rows: Vec<_> = app.engine.states().iter().map(|s| view::summary(s, now)).collect();
    rows.sort_by(|a, b| a.mission_id.cmp(&b.mission_id));
    Json(rows)
}

async fn get_mission(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<MissionView>> {
    let state = app.engine.state(&mission_id(&id)?)?;
    Ok(Json(view::build_view(&state, app.now())))
}

async fn get_timeline(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<view::TimelineGroup>>> {
    let state = app.engine.state(&mission_id(&id)?)?;
    Ok(Json(view::timeline(&state)))
}

async fn get_leaders(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<view::Leader>>> {
    let state = app.engine.state(&mission_id(&id)?)?;
    Ok(Json(view::leaders(&state)))
}

#[derive(Deserialize)]
struct TextBody {
    author: ParticipantId,
    text: String,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum SupportKind {
    Repost,
    Favorite,
}

#[derive(Deserialize)]
struct VoteBody {
    author: ParticipantId,
    idea_id: IdeaId,
    #[serde(default = "default_support")]
    kind: SupportKind,
}

fn default_support() -> SupportKind {
    SupportKind::Favorite
}

#[derive(Deserialize)]
struct SubscribeBody {
    author: ParticipantId,
    phases: BTreeSet<Phase>,
}

#[derive(Deserialize)]
struct AuthorBody {
    author: ParticipantId,
}

/// Runs a mission command and answers with the updated view.
async fn command<F>(app: AppState, id: String, f: F) -> ApiResult<Json<MissionView>>
where
    F: FnOnce(&Engine, &MissionId, Timestamp) -> Result<Arc<wedo_core::MissionState>, EngineError>
        + Send
        + 'static,
{
    let id = mission_id(&id)?;
    let now = app.now();
    let engine = app.engine.clone();
    let state = blocking(move || f(&engine, &id, now)).await?;
    Ok(Json(view::build_view(&state, app.now())))
}

async fn submit_idea(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<MissionView>> {
    let req: TextBody = parse(&body)?;
    command(app, id, move |e, id, now| e.submit_idea(id, &req.author, &req.text, now)).await
}

async fn vote(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<MissionView>> {
    let req: VoteBody = parse(&body)?;
    let kind = match req.kind {
        SupportKind::Repost => VoteKind::Repost,
        SupportKind::Favorite => VoteKind::Favorite,
    };
    command(app, id, move |e, id, now| e.vote(id, &req.author, req.idea_id, kind, now)).await
}

async fn add_detail(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<MissionView>> {
    let req: TextBody = parse(&body)?;
    command(app, id, move |e, id, now| e.add_detail(id, &req.author, &req.text, now)).await
}

async fn subscribe(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<MissionView>> {
    let req: SubscribeBody = parse(&body)?;
    command(app, id, move |e, id, now| e.subscribe(id, &req.author, req.phases, now)).await
}

async fn cancel(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<MissionView>> {
    let req: AuthorBody = parse(&body)?;
    command(app, id, move |e, id, now| e.cancel(id, &req.author, now)).await
}

#[derive(Serialize)]
struct Accepted {
    position: u64,
}

/// Accepts one transport observation (`{"v":1,"kind":"PostObserved","payload":{...}}`).
async fn inbound(State(app): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let position = match &app.inbound {
        Inbound::Webhook(adapter) => adapter
            .receive(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "MalformedRequest", e.to_string()))?,
        Inbound::Sim(feed) => {
            let event: TransportEvent = parse(&body)?;
            feed.inject(event);
            feed.inbound_len() as u64
        }
    };
    app.nudge();
    Ok((StatusCode::ACCEPTED, Json(Accepted { position })).into_response())
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    missions: usize,
    pending_messages: usize,
    transport: String,
}

async fn healthz(State(app): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok",
        missions: app.engine.states().len(),
        pending_messages: app.engine.pending_messages().len(),
        transport: app.engine.transport().name().to_string(),
    })
}

async fn placeholder() -> impl IntoResponse {
    ([(header::CACHE_CONTROL, "no-cache")], Html(PLACEHOLDER_PAGE))
}

/// The full router. Static assets come from `static_dir` when given,
/// otherwise a built-in page is served at `/`.
pub fn router(app: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/missions", post(create_mission).get(list_missions))
        .route("/missions/{id}", get(get_mission))
        .route("/missions/{id}/ideas", post(submit_idea))
        .route("/missions/{id}/votes", post(vote))
        .route("/missions/{id}/details", post(add_detail))
        .route("/missions/{id}/subscribe", post(subscribe))
        .route("/missions/{id}/cancel", post(cancel))
        .route("/missions/{id}/timeline", get(get_timeline))
        .route("/missions/{id}/leaders", get(get_leaders))
        .route("/inbound", post(inbound))
        .route("/healthz", get(healthz))
        .with_state(app);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    }
}
