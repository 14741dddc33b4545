//! HTTP API over the engine. Sessions live in memory; requests for one session are serialized
//! by a per-session lock while different sessions proceed in parallel.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::sync::{Mutex, RwLock};
use tower_http::services::ServeDir;

use crate::config::EngineConfig;
use crate::disambiguation::{
    confirm, generate_candidates, page, CandidateSet, DisambiguationError, Resolver, ResolverMode, CANDIDATE_COUNT,
};
use crate::plan::{build_plan, simulate, to_xml, PlanError, SkillLibrary};
use crate::scene::{load_scene, SceneGraph};
use crate::session::{Phase, PoseTrack, RingEvent, RingEventKind, SessionError, SessionState, Snapshot};

type ResolverFactory = dyn Fn(ResolverMode) -> Result<Arc<dyn Resolver>, String> + Send + Sync;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "schema", message)
    }

    fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} {id:?}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": {"code": self.code, "message": self.message}}))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::Protocol { .. } => (StatusCode::CONFLICT, "protocol"),
            SessionError::NonMonotonic { .. } => (StatusCode::CONFLICT, "non_monotonic"),
            SessionError::Phase { .. } => (StatusCode::CONFLICT, "phase"),
            SessionError::RetryExhausted => (StatusCode::CONFLICT, "retry_exhausted"),
            SessionError::NoSnapshot(_) => (StatusCode::BAD_REQUEST, "no_snapshot"),
            SessionError::InvalidSnapshot(_) | SessionError::Log { .. } => (StatusCode::BAD_REQUEST, "schema"),
            SessionError::EmptyScene => (StatusCode::UNPROCESSABLE_ENTITY, "empty_scene"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<DisambiguationError> for ApiError {
    fn from(e: DisambiguationError) -> Self {
        match e {
            DisambiguationError::Session(inner) => inner.into(),
            DisambiguationError::Rank(_) | DisambiguationError::Index(_) => ApiError::bad_request(e.to_string()),
            DisambiguationError::SceneTooSmall { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "scene_too_small", e.to_string())
            }
            DisambiguationError::ResolverTimeout { .. } => {
                ApiError::new(StatusCode::GATEWAY_TIMEOUT, "resolver_timeout", e.to_string())
            }
            DisambiguationError::ResolverProtocol(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, "resolver_protocol", e.to_string())
            }
        }
    }
}

impl From<PlanError> for ApiError {
    fn from(e: PlanError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "plan", e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or_default()
}

struct Session {
    id: String,
    scene_ref: String,
    scene: Arc<SceneGraph>,
    resolver: Arc<dyn Resolver>,
    resolver_mode: ResolverMode,
    created_at: u64,
    last_used: Instant,
    state: SessionState,
    track: PoseTrack,
    candidates: Option<CandidateSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: String,
    pub scene_ref: String,
    pub created_at: u64,
    pub phase: Phase,
    pub resolver: ResolverMode,
    pub retries_used: u8,
    pub snapshots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

impl Session {
    fn handle(&self) -> SessionHandle {
        SessionHandle {
            session_id: self.id.clone(),
            scene_ref: self.scene_ref.clone(),
            created_at: self.created_at,
            phase: self.state.phase(),
            resolver: self.resolver_mode,
            retries_used: self.state.retries_used(),
            snapshots: self.state.snapshots().len(),
            transcript: self.state.transcript().map(str::to_owned),
        }
    }
}

/// Shared server state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: EngineConfig,
    skills: SkillLibrary,
    scenes: RwLock<HashMap<String, Arc<SceneGraph>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    factory: Box<ResolverFactory>,
    counter: AtomicU64,
}

impl AppState {
    pub fn new(config: EngineConfig) -> Self {
        let cfg = config.clone();
        AppState::with_resolver_factory(config, move |mode| cfg.build_resolver(mode).map_err(|e| e.to_string()))
    }

    /// Custom resolver construction, e.g. a slow mock in tests.
    pub fn with_resolver_factory(
        config: EngineConfig,
        factory: impl Fn(ResolverMode) -> Result<Arc<dyn Resolver>, String> + Send + Sync + 'static,
    ) -> Self {
        AppState {
            inner: Arc::new(Inner {
                config,
                skills: SkillLibrary::default(),
                scenes: RwLock::default(),
                sessions: RwLock::default(),
                factory: Box::new(factory),
                counter: AtomicU64::new(0),
            }),
        }
    }

    /// Register a scene directly (used for preloading).
    pub async fn add_scene(&self, scene: SceneGraph) -> String {
        let scene_ref = scene_ref_for(scene.to_json().as_bytes());
        self.inner.scenes.write().await.insert(scene_ref.clone(), Arc::new(scene));
        scene_ref
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let sessions = self.inner.sessions.read().await;
        sessions.get(id).cloned().ok_or_else(|| ApiError::not_found("session", id))
    }

    async fn expire_sessions(&self) {
        let ttl = Duration::from_secs(self.inner.config.server.session_ttl_secs);
        let mut sessions = self.inner.sessions.write().await;
        let mut expired = Vec::new();
        for (id, s) in sessions.iter() {
            // A locked session is in use, so it is not idle.
            if let Ok(guard) = s.try_lock() {
                if guard.last_used.elapsed() > ttl {
                    expired.push(id.clone());
                }
            }
        }
        for id in expired {
            sessions.remove(&id);
        }
    }

    fn next_session_id(&self) -> String {
        let n = self.inner.counter.fetch_add(1, Ordering::Relaxed);
        let mut hasher = Sha256::new();
        hasher.update(n.to_le_bytes());
        hasher.update(unix_ms().to_le_bytes());
        hasher.update(std::process::id().to_le_bytes());
        format!("s{}", &hex::encode(hasher.finalize())[..20])
    }
}

fn scene_ref_for(bytes: &[u8]) -> String {
    format!("scene-{}", &hex::encode(Sha256::digest(bytes))[..16])
}

pub fn router(state: AppState) -> Router {
    let static_dir = state.inner.config.server.static_dir.clone();
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/config", get(get_config))
        .route("/scenes", post(post_scene).get(list_scenes))
        .route("/scenes/:scene_ref", get(get_scene))
        .route("/sessions", post(post_session))
        .route("/sessions/:id", get(get_session).delete(delete_session))
        .route("/sessions/:id/events", post(post_event))
        .route("/sessions/:id/candidates", get(get_candidates))
        .route("/sessions/:id/confirm", post(post_confirm))
        .route("/sessions/:id/retry", post(post_retry))
        .with_state(state);
    match static_dir {
        Some(dir) if dir.is_dir() => api.fallback_service(ServeDir::new(dir)),
        _ => api,
    }
}

/// Bind and serve until the process is stopped.
pub async fn serve(config: EngineConfig, preload: &[&Path]) -> anyhow::Result<()> {
    let addr: SocketAddr = config.server.bind.parse().map_err(|e| anyhow::anyhow!("bad bind address: {e}"))?;
    let state = AppState::new(config);
    for path in preload {
        let bytes = std::fs::read(path)?;
        let scene_ref = state.add_scene(load_scene(&bytes)?).await;
        tracing::info!(scene = %path.display(), %scene_ref, "preloaded scene");
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn healthz(State(state): State<AppState>) -> Json<Value> {
    let sessions = state.inner.sessions.read().await.len();
    let scenes = state.inner.scenes.read().await.len();
    Json(json!({"status": "ok", "sessions": sessions, "scenes": scenes}))
}

async fn get_config(State(state): State<AppState>) -> Json<Value> {
    let cfg = &state.inner.config;
    Json(json!({"angles": cfg.angles, "resolver": cfg.resolver.mode, "candidate_count": CANDIDATE_COUNT}))
}

async fn post_scene(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let scene = load_scene(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let (objects, rooms) = (scene.objects().len(), scene.rooms().len());
    let scene_ref = state.add_scene(scene).await;
    Ok((StatusCode::CREATED, Json(json!({"scene_ref": scene_ref, "objects": objects, "rooms": rooms}))))
}

async fn list_scenes(State(state): State<AppState>) -> Json<Value> {
    let mut refs: Vec<String> = state.inner.scenes.read().await.keys().cloned().collect();
    refs.sort();
    Json(json!({"scenes": refs}))
}

async fn get_scene(State(state): State<AppState>, UrlPath(scene_ref): UrlPath<String>) -> Result<Response, ApiError> {
    let scenes = state.inner.scenes.read().await;
    let scene = scenes.get(&scene_ref).ok_or_else(|| ApiError::not_found("scene", &scene_ref))?;
    Ok(([("content-type", "application/json")], scene.to_json()).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    scene_ref: String,
    #[serde(default)]
    resolver: Option<ResolverMode>,
}

async fn post_session(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<SessionHandle>), ApiError> {
    let req: NewSession = parse_body(&body)?;
    let scene = state
        .inner
        .scenes
        .read()
        .await
        .get(&req.scene_ref)
        .cloned()
        .ok_or_else(|| ApiError::not_found("scene", &req.scene_ref))?;
    let mode = req.resolver.unwrap_or(state.inner.config.resolver.mode);
    let resolver = (state.inner.factory)(mode).map_err(ApiError::bad_request)?;
    state.expire_sessions().await;
    let session = Session {
        id: state.next_session_id(),
        scene_ref: req.scene_ref,
        scene,
        resolver,
        resolver_mode: mode,
        created_at: unix_ms(),
        last_used: Instant::now(),
        state: SessionState::new(),
        track: PoseTrack::default(),
        candidates: None,
    };
    let handle = session.handle();
    state.inner.sessions.write().await.insert(session.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(handle)))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<SessionHandle> {
    let session = state.session(&id).await?;
    let guard = session.lock().await;
    Ok(Json(guard.handle()))
}

async fn delete_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<StatusCode, ApiError> {
    let removed = state.inner.sessions.write().await.remove(&id);
    match removed {
        Some(s) => {
            s.lock().await.state.abandon();
            Ok(StatusCode::NO_CONTENT)
        }
        None => Err(ApiError::not_found("session", &id)),
    }
}

/// One client event. Snapshots carry explicit rays; the server never infers geometry.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientEvent {
    Touch { t: u64 },
    Press { t: u64, #[serde(default)] snapshot: Option<Snapshot> },
    Release { t: u64, #[serde(default)] snapshot: Option<Snapshot> },
    Snapshot(Snapshot),
    Transcript { text: String },
}

async fn post_event(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<SessionHandle> {
    let session = state.session(&id).await?;
    let event: ClientEvent = parse_body(&body)?;
    let mut guard = session.lock().await;
    let s = &mut *guard;
    s.last_used = Instant::now();
    let (kind, t, snapshot) = match event {
        ClientEvent::Snapshot(snapshot) => {
            snapshot.validate()?;
            s.track.record(snapshot);
            return Ok(Json(s.handle()));
        }
        ClientEvent::Transcript { text } => {
            s.state.attach_transcript(text)?;
            return Ok(Json(s.handle()));
        }
        ClientEvent::Touch { t } => (RingEventKind::Touch, t, None),
        ClientEvent::Press { t, snapshot } => (RingEventKind::Press, t, snapshot),
        ClientEvent::Release { t, snapshot } => (RingEventKind::Release, t, snapshot),
    };
    if let Some(snapshot) = snapshot {
        snapshot.validate()?;
        s.track.record(snapshot);
    }
    s.state.handle_event(RingEvent::new(kind, t), &mut s.track)?;
    if kind == RingEventKind::Release {
        s.candidates = None;
    }
    Ok(Json(s.handle()))
}

#[derive(Deserialize)]
struct PageQuery {
    page: Option<String>,
}

#[derive(Serialize)]
struct CandidatePage<'a> {
    page: usize,
    pages: usize,
    total: usize,
    candidates: &'a [crate::disambiguation::CandidateInstruction],
    resolver_id: &'a str,
    latency_ms: u64,
    repaired: bool,
    phase: Phase,
}

async fn get_candidates(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<PageQuery>,
) -> Result<Response, ApiError> {
    let index: usize = match q.page.as_deref() {
        None | Some("") => 0,
        Some(p) => p.parse().map_err(|_| ApiError::bad_request(format!("page must be 0, 1 or 2, got {p:?}")))?,
    };
    if index >= CANDIDATE_COUNT / crate::disambiguation::PAGE_SIZE {
        return Err(DisambiguationError::Index(index).into());
    }
    let session = state.session(&id).await?;
    let mut guard = session.lock().await;
    let s = &mut *guard;
    s.last_used = Instant::now();
    match s.state.phase() {
        Phase::Presenting if s.candidates.is_some() => {}
        Phase::Dispatched => {
            let command = s.state.finalize(&s.scene, &state.inner.config.angles)?;
            let (scene, resolver) = (s.scene.clone(), s.resolver.clone());
            // Resolvers may block (remote HTTP); keep them off the async workers.
            let set = tokio::task::spawn_blocking(move || generate_candidates(&command, &scene, resolver.as_ref()))
                .await
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
            s.state.mark_presenting()?;
            s.candidates = Some(set);
        }
        phase => {
            return Err(SessionError::Phase { operation: "candidates", phase }.into());
        }
    }
    let set = s.candidates.as_ref().expect("set present while presenting");
    let body = CandidatePage {
        page: index,
        pages: CANDIDATE_COUNT / crate::disambiguation::PAGE_SIZE,
        total: set.candidates.len(),
        candidates: page(set, index)?,
        resolver_id: &set.resolver_id,
        latency_ms: set.latency_ms,
        repaired: set.repaired,
        phase: s.state.phase(),
    };
    Ok(Json(body).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfirmRequest {
    rank: u8,
}

async fn post_confirm(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Value> {
    let req: ConfirmRequest = parse_body(&body)?;
    let session = state.session(&id).await?;
    let mut guard = session.lock().await;
    let s = &mut *guard;
    s.last_used = Instant::now();
    let Some(set) = s.candidates.clone() else {
        return Err(SessionError::Phase { operation: "confirm", phase: s.state.phase() }.into());
    };
    if !(1..=CANDIDATE_COUNT as u8).contains(&req.rank) {
        return Err(DisambiguationError::Rank(req.rank).into());
    }
    // Compile before committing so a plan error leaves the session presenting.
    let chosen = set.by_rank(req.rank).ok_or(DisambiguationError::Rank(req.rank))?;
    let preview = crate::disambiguation::ConfirmedInstruction {
        instruction: chosen.clone(),
        user_pose: s.state.snapshots().last().map(|x| x.head.position).unwrap_or_default(),
    };
    let tree = build_plan(&preview, &s.scene, &state.inner.skills)?;
    let confirmed = confirm(&mut s.state, &set, req.rank)?;
    let trace = simulate(&tree, &s.scene);
    Ok(Json(json!({
        "session": s.handle(),
        "instruction": confirmed.instruction,
        "user_pose": confirmed.user_pose,
        "bt_xml": to_xml(&tree),
        "trace": trace,
    })))
}

async fn post_retry(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<SessionHandle> {
    let session = state.session(&id).await?;
    let mut guard = session.lock().await;
    let s = &mut *guard;
    s.last_used = Instant::now();
    s.state.retry()?;
    s.candidates = None;
    Ok(Json(s.handle()))
}
