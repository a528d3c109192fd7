//! HTTP and WebSocket session service.
//!
//! | method | path                          | token | body / reply                        |
//! |--------|-------------------------------|-------|-------------------------------------|
//! | POST   | `/sessions`                   |       | `CreateSession` / `CreatedSession`  |
//! | GET    | `/sessions`                   |       | `[SessionStatus]`                   |
//! | GET    | `/sessions/{id}/observation`  |       | `ObservationBody`                   |
//! | GET    | `/sessions/{id}/frame.png`    |       | PNG of the current view             |
//! | POST   | `/sessions/{id}/actions`      | yes   | raw action text / `ActionResult`    |
//! | GET    | `/sessions/{id}/status`       |       | `SessionStatus`                     |
//! | GET    | `/sessions/{id}/log`          |       | JSON Lines log, 409 while running   |
//! | POST   | `/sessions/{id}/abort`        | yes   | `AbortRequest` / `SessionStatus`    |
//! | POST   | `/sessions/{id}/heartbeat`    | yes   | `SessionStatus`                     |
//! | GET    | `/sessions/{id}/stream`       |       | WebSocket, see [`crate::stream`]    |

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use rand::Rng;
use thiserror::Error;
use tokio::sync::broadcast;

use roomescape::episode::{Episode, EpisodeOptions};
use roomescape::log::Outcome;
use roomescape::protocol::system_prompt;
use roomescape::render::{Frame, DEFAULT_SIZE};
use roomescape::scene::SceneConfig;
use roomescape::scenegen::generate;

use crate::api::*;
use crate::stream::FrameMessage;

const MAX_FRAME_SIZE: u32 = 2048;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no session {0}")]
    NotFound(String),
    #[error("missing or wrong session token")]
    Unauthorized,
    #[error("another request on this session is in flight")]
    Busy,
    #[error("the episode is over ({0})")]
    Over(String),
    #[error("the episode is still running")]
    Running,
    #[error("{0}")]
    BadRequest(String),
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("session limit of {0} reached")]
    Full(usize),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Busy | ServiceError::Over(_) | ServiceError::Running => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Full(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: self.to_string() };
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Running sessions untouched for this long are aborted.
    pub idle_timeout: Option<Duration>,
    pub max_sessions: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            idle_timeout: None,
            max_sessions: 256,
        }
    }
}

#[derive(Debug, Clone)]
enum Push {
    Frame(Arc<Vec<u8>>),
    Text(Arc<String>),
}

struct Session {
    id: String,
    token: String,
    role: ClientRole,
    frame_size: u32,
    episode: Mutex<Episode>,
    in_flight: AtomicBool,
    last_seen: Mutex<Instant>,
    events: broadcast::Sender<Push>,
}

impl Session {
    fn episode(&self) -> MutexGuard<'_, Episode> {
        self.episode.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn touch(&self) {
        *self.last_seen.lock().unwrap_or_else(|e| e.into_inner()) = Instant::now();
    }

    fn idle(&self) -> Duration {
        self.last_seen.lock().unwrap_or_else(|e| e.into_inner()).elapsed()
    }

    fn check_token(&self, headers: &HeaderMap) -> Result<(), ServiceError> {
        match headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok()) {
            Some(t) if t == self.token => Ok(()),
            _ => Err(ServiceError::Unauthorized),
        }
    }

    fn status(&self) -> SessionStatus {
        let ep = self.episode();
        let w = ep.world();
        SessionStatus {
            session_id: self.id.clone(),
            scene_id: ep.header().scene_id.clone(),
            role: self.role,
            status: w.status,
            outcome: ep.outcome(),
            steps_used: w.steps_used,
            step_limit: w.step_limit,
            room: w.current_room,
            idle_seconds: self.idle().as_secs(),
        }
    }

    fn frame_message(&self, frame: &Frame, step_index: u32) -> FrameMessage {
        FrameMessage {
            width: frame.width,
            height: frame.height,
            step_index,
            session_id: self.id.clone(),
            pixels: frame.pixels.clone(),
        }
    }
}

/// Marks a session busy for the lifetime of the guard.
struct InFlight(Arc<Session>);

impl InFlight {
    fn acquire(session: &Arc<Session>) -> Result<Self, ServiceError> {
        session
            .in_flight
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map_err(|_| ServiceError::Busy)?;
        Ok(Self(session.clone()))
    }
}

impl Drop for InFlight {
    fn drop(&mut self) {
        self.0.in_flight.store(false, Ordering::Release);
    }
}

/// Shared service state; clone freely.
#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<BTreeMap<String, Arc<Session>>>>,
    next_id: Arc<AtomicU64>,
    config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            sessions: Arc::default(),
            next_id: Arc::new(AtomicU64::new(1)),
            config: Arc::new(config),
        }
    }

    fn sessions(&self) -> MutexGuard<'_, BTreeMap<String, Arc<Session>>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn get(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Aborts running sessions idle past the configured timeout; returns
    /// the ids it aborted.
    pub fn reap_idle(&self) -> Vec<String> {
        let Some(limit) = self.config.idle_timeout else {
            return Vec::new();
        };
        let all: Vec<Arc<Session>> = self.sessions().values().cloned().collect();
        let mut reaped = Vec::new();
        for s in all {
            if s.idle() < limit || s.in_flight.load(Ordering::Acquire) {
                continue;
            }
            let mut ep = s.episode();
            if !ep.is_over() {
                ep.abort("idle timeout");
                drop(ep);
                end_stream(&s, Outcome::Aborted);
                reaped.push(s.id.clone());
            }
        }
        reaped
    }
}

fn end_stream(session: &Session, outcome: Outcome) {
    let text = serde_json::to_string(&StreamEvent::End { outcome }).expect("event serializes");
    let _ = session.events.send(Push::Text(Arc::new(text)));
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/observation", get(observation))
        .route("/sessions/{id}/frame.png", get(frame_png))
        .route("/sessions/{id}/actions", post(act))
        .route("/sessions/{id}/status", get(status))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/abort", post(abort))
        .route("/sessions/{id}/heartbeat", post(heartbeat))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

/// Serves until the listener fails, reaping idle sessions in the background.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    if let Some(limit) = state.config.idle_timeout {
        let reaper = state.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval((limit / 4).max(Duration::from_millis(50)));
            loop {
                tick.tick().await;
                reaper.reap_idle();
            }
        });
    }
    axum::serve(listener, router(state)).await
}

fn new_token() -> String {
    let bytes: [u8; 16] = rand::rng().random();
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn resolve_scene(req: &CreateSession) -> Result<SceneConfig, ServiceError> {
    match (&req.scene, &req.generate) {
        (Some(scene), None) => {
            let v = scene.violations();
            if v.is_empty() {
                Ok(scene.clone())
            } else {
                let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                Err(ServiceError::Invalid(msgs.join("; ")))
            }
        }
        (None, Some(g)) => {
            generate(&g.difficulty, g.style, g.seed).map_err(|e| ServiceError::BadRequest(e.to_string()))
        }
        _ => Err(ServiceError::BadRequest("set exactly one of `scene` and `generate`".into())),
    }
}

async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<Json<CreatedSession>, ServiceError> {
    let frame_size = req.frame_size.unwrap_or(DEFAULT_SIZE);
    if frame_size == 0 || frame_size % 2 != 0 || frame_size > MAX_FRAME_SIZE {
        return Err(ServiceError::BadRequest(format!(
            "frame_size must be even and in 2..={MAX_FRAME_SIZE}"
        )));
    }
    if req.step_limit == Some(0) {
        return Err(ServiceError::BadRequest("step_limit must be positive".into()));
    }
    let role = req.role;
    let episode = tokio::task::spawn_blocking(move || -> Result<Episode, ServiceError> {
        let scene = resolve_scene(&req)?;
        let default_name = match req.role {
            ClientRole::Agent => "remote",
            ClientRole::Human => "human",
        };
        let opts = EpisodeOptions {
            step_limit: req.step_limit,
            prefix: req.prefix.clone(),
            frames_dir: None,
            frame_size,
            agent_name: req.agent_name.clone(),
        };
        Episode::new(&scene, &opts, default_name).map_err(|e| ServiceError::Invalid(e.to_string()))
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;

    let mut sessions = state.sessions();
    if sessions.len() >= state.config.max_sessions {
        return Err(ServiceError::Full(state.config.max_sessions));
    }
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let created = CreatedSession {
        session_id: id.clone(),
        token: new_token(),
        scene_id: episode.header().scene_id.clone(),
        step_limit: episode.world().step_limit,
        system_prompt: system_prompt(),
    };
    let (events, _) = broadcast::channel(64);
    sessions.insert(
        id.clone(),
        Arc::new(Session {
            id,
            token: created.token.clone(),
            role,
            frame_size,
            episode: Mutex::new(episode),
            in_flight: AtomicBool::new(false),
            last_seen: Mutex::new(Instant::now()),
            events,
        }),
    );
    Ok(Json(created))
}

async fn list_sessions(State(state): State<AppState>) -> Json<Vec<SessionStatus>> {
    let all: Vec<Arc<Session>> = state.sessions().values().cloned().collect();
    Json(all.iter().map(|s| s.status()).collect())
}

async fn render_current(session: Arc<Session>) -> Result<(Frame, u32), ServiceError> {
    tokio::task::spawn_blocking(move || {
        let ep = session.episode();
        let f = ep.render(session.frame_size)?;
        Ok((f, ep.world().steps_used))
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))?
    .map_err(|e: roomescape::render::RenderError| ServiceError::Internal(e.to_string()))
}

async fn observation(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ObservationBody>, ServiceError> {
    let session = state.get(&id)?;
    session.touch();
    let s = session.clone();
    let (body, png) = tokio::task::spawn_blocking(move || -> Result<_, ServiceError> {
        let ep = s.episode();
        let frame = ep.render(s.frame_size).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let png = frame.encode_png().map_err(|e| ServiceError::Internal(e.to_string()))?;
        let w = ep.world();
        let body = ObservationBody {
            session_id: s.id.clone(),
            step_index: w.steps_used + 1,
            steps_used: w.steps_used,
            step_limit: w.step_limit,
            status: w.status,
            outcome: ep.outcome(),
            feedback: ep.feedback().to_string(),
            bag: ep.bag().to_string(),
            step_prompt: ep.step_prompt(),
            frame_ref: ep.frame_ref(),
            frame: FramePayload {
                width: frame.width,
                height: frame.height,
                png_base64: String::new(),
            },
        };
        Ok((body, png))
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    let mut body = body;
    body.frame.png_base64 = base64::engine::general_purpose::STANDARD.encode(png);
    Ok(Json(body))
}

async fn frame_png(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let session = state.get(&id)?;
    let (frame, _) = render_current(session).await?;
    let png = frame.encode_png().map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn act(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<ActionResult>, ServiceError> {
    let session = state.get(&id)?;
    session.check_token(&headers)?;
    let raw = String::from_utf8(body.to_vec()).map_err(|_| ServiceError::BadRequest("action is not UTF-8".into()))?;
    let guard = InFlight::acquire(&session)?;
    session.touch();
    let s = session.clone();
    let (result, push) = tokio::task::spawn_blocking(move || -> Result<_, ServiceError> {
        let _guard = guard;
        let mut ep = s.episode();
        if let Some(o) = ep.outcome() {
            return Err(ServiceError::Over(format!("{o:?}").to_lowercase()));
        }
        let record = ep
            .step(&raw)
            .map_err(|e| ServiceError::Over(e.to_string()))?
            .clone();
        let w = ep.world();
        let result = ActionResult {
            record: record.clone(),
            status: w.status,
            outcome: ep.outcome(),
            steps_used: w.steps_used,
            step_limit: w.step_limit,
        };
        let mut push = Vec::new();
        if s.events.receiver_count() > 0 {
            let frame = ep.render(s.frame_size).map_err(|e| ServiceError::Internal(e.to_string()))?;
            push.push(Push::Frame(Arc::new(s.frame_message(&frame, w.steps_used).encode())));
            let event = StreamEvent::Step {
                record: Box::new(record),
                status: w.status,
                outcome: ep.outcome(),
                bag: ep.bag().to_string(),
            };
            push.push(Push::Text(Arc::new(serde_json::to_string(&event).expect("event serializes"))));
        }
        Ok((result, push))
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    for p in push {
        let _ = session.events.send(p);
    }
    if let Some(o) = result.outcome {
        end_stream(&session, o);
    }
    Ok(Json(result))
}

async fn status(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionStatus>, ServiceError> {
    Ok(Json(state.get(&id)?.status()))
}

async fn log(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let session = state.get(&id)?;
    let log = session.episode().log().ok_or(ServiceError::Running)?;
    let text = log.to_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn abort(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<AbortRequest>,
) -> Result<Json<SessionStatus>, ServiceError> {
    let session = state.get(&id)?;
    session.check_token(&headers)?;
    let _guard = InFlight::acquire(&session)?;
    {
        let mut ep = session.episode();
        if let Some(o) = ep.outcome() {
            return Err(ServiceError::Over(format!("{o:?}").to_lowercase()));
        }
        ep.abort(req.reason);
    }
    end_stream(&session, Outcome::Aborted);
    session.touch();
    Ok(Json(session.status()))
}

async fn heartbeat(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Json<SessionStatus>, ServiceError> {
    let session = state.get(&id)?;
    session.check_token(&headers)?;
    session.touch();
    Ok(Json(session.status()))
}

async fn stream(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ServiceError> {
    let session = state.get(&id)?;
    let rx = session.events.subscribe();
    let (frame, step) = render_current(session.clone()).await?;
    let first = session.frame_message(&frame, step).encode();
    let outcome = session.episode().outcome();
    Ok(ws.on_upgrade(move |socket| pump(socket, rx, first, outcome)))
}

async fn pump(mut socket: WebSocket, mut rx: broadcast::Receiver<Push>, first: Vec<u8>, outcome: Option<Outcome>) {
    if socket.send(Message::Binary(first.into())).await.is_err() {
        return;
    }
    if let Some(outcome) = outcome {
        let text = serde_json::to_string(&StreamEvent::End { outcome }).expect("event serializes");
        let _ = socket.send(Message::Text(text.into())).await;
        let _ = socket.send(Message::Close(None)).await;
        return;
    }
    loop {
        let push = match rx.recv().await {
            Ok(p) => p,
            Err(broadcast::error::RecvError::Lagged(_)) => continue,
            Err(broadcast::error::RecvError::Closed) => break,
        };
        let (msg, last) = match push {
            Push::Frame(b) => (Message::Binary(b.as_ref().clone().into()), false),
            Push::Text(t) => {
                let last = t.contains("\"type\":\"end\"");
                (Message::Text(t.as_str().to_owned().into()), last)
            }
        };
        if socket.send(msg).await.is_err() {
            return;
        }
        if last {
            break;
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}

#[cfg(test)]
mod tests {
    use super::*;
    use roomescape::catalog::Style;

    fn session() -> Arc<Session> {
        let scene = generate("d1", Style::Kitchen, 1).unwrap();
        let (events, _) = broadcast::channel(4);
        Arc::new(Session {
            id: "s1".into(),
            token: "t".into(),
            role: ClientRole::Agent,
            frame_size: 16,
            episode: Mutex::new(Episode::new(&scene, &EpisodeOptions::default(), "x").unwrap()),
            in_flight: AtomicBool::new(false),
            last_seen: Mutex::new(Instant::now()),
            events,
        })
    }

    #[test]
    fn second_request_in_flight_is_busy() {
        let s = session();
        let g = InFlight::acquire(&s).unwrap();
        assert!(matches!(InFlight::acquire(&s), Err(ServiceError::Busy)));
        assert_eq!(ServiceError::Busy.status(), StatusCode::CONFLICT);
        drop(g);
        assert!(InFlight::acquire(&s).is_ok());
    }

    #[test]
    fn token_is_checked() {
        let s = session();
        let mut h = HeaderMap::new();
        assert!(matches!(s.check_token(&h), Err(ServiceError::Unauthorized)));
        h.insert(TOKEN_HEADER, "t".parse().unwrap());
        assert!(s.check_token(&h).is_ok());
        assert_eq!(new_token().len(), 32);
    }
}
