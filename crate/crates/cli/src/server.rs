//! HTTP front-end over [`Service`]. Commands are serialized through one
//! mutex, so they reach the engine in arrival order. New log records are
//! pushed to `/events` subscribers as server-sent events.

use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use reflow_core::engine::EventRecord;
use reflow_core::gateway::{ObservedAssignment, OutcomeLabel};
use reflow_core::log::{FileSink, LogSink};
use reflow_core::process::TaskCall;
use reflow_core::scenario::{parse_process, parse_task_call};
use reflow_core::service::{LoadRequest, Service, ServiceError};

/// Forwards every committed record to push subscribers, after the optional
/// file sink accepted it.
struct BroadcastSink {
    file: Option<FileSink>,
    tx: broadcast::Sender<EventRecord>,
}

impl LogSink for BroadcastSink {
    fn append(&mut self, record: &EventRecord) -> std::io::Result<()> {
        if let Some(f) = &mut self.file {
            f.append(record)?;
        }
        // no subscribers is fine
        let _ = self.tx.send(record.clone());
        Ok(())
    }
}

pub struct AppState {
    service: Mutex<Service>,
    tx: broadcast::Sender<EventRecord>,
    log_dir: Option<PathBuf>,
    runs: Mutex<u64>,
}

pub type Shared = Arc<AppState>;

impl AppState {
    pub fn new(log_dir: Option<PathBuf>) -> Shared {
        let (tx, _) = broadcast::channel(1024);
        Arc::new(AppState {
            service: Mutex::new(Service::new()),
            tx,
            log_dir,
            runs: Mutex::new(0),
        })
    }
}

pub struct ApiError {
    error: ServiceError,
    status: StatusCode,
}

impl From<ServiceError> for ApiError {
    fn from(error: ServiceError) -> Self {
        ApiError {
            status: status_for(&error.code),
            error,
        }
    }
}

fn status_for(code: &str) -> StatusCode {
    match code {
        "NO_SCENARIO" | "MODE_ERROR" | "NOT_QUIESCENT" | "STALE_PLAN" | "NO_PENDING_PLAN" | "BAD_LIFECYCLE"
        | "NOT_ENABLED" | "NO_CAPABLE_SERVICE" => StatusCode::CONFLICT,
        "UNKNOWN_WORK_ITEM" | "UNKNOWN_TASK" | "UNKNOWN_EVENT" => StatusCode::NOT_FOUND,
        "STORAGE_FAILURE" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.error)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn bad_request(e: impl std::fmt::Display) -> ApiError {
    ServiceError::new("SYNTAX_ERROR", e.to_string()).into()
}

/// A task call as text (`move(rbt1, a, b)`) or as `{task, args}`.
#[derive(Deserialize)]
#[serde(untagged)]
pub enum CallInput {
    Text(String),
    Call(TaskCall),
}

impl CallInput {
    fn resolve(self) -> Result<TaskCall, ApiError> {
        match self {
            CallInput::Text(t) => parse_task_call(&t).map_err(bad_request),
            CallInput::Call(c) => Ok(c),
        }
    }
}

#[derive(Deserialize)]
pub struct AssignBody {
    pub call: CallInput,
}

#[derive(Deserialize)]
pub struct ItemBody {
    pub item: u64,
}

#[derive(Deserialize)]
pub struct FinishBody {
    pub item: u64,
    #[serde(default)]
    pub outcome: Option<OutcomeLabel>,
    /// Omitted: the participant script decides.
    #[serde(default)]
    pub observed: Option<Vec<ObservedAssignment>>,
}

#[derive(Deserialize)]
pub struct InjectBody {
    pub event: String,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Deserialize)]
pub struct ReplaceBody {
    pub process: String,
}

#[derive(Deserialize)]
pub struct FromQuery {
    #[serde(default)]
    pub from: u64,
}

#[derive(Deserialize)]
pub struct EventsQuery {
    pub from: Option<u64>,
}

#[derive(Serialize)]
struct Health {
    loaded: bool,
}

fn with<T>(st: &AppState, f: impl FnOnce(&mut Service) -> Result<T, ServiceError>) -> ApiResult<T> {
    let mut service = st.service.lock().unwrap_or_else(|p| p.into_inner());
    Ok(Json(f(&mut service)?))
}

async fn load_scenario(State(st): State<Shared>, Json(req): Json<LoadRequest>) -> ApiResult<impl Serialize> {
    let file = match &st.log_dir {
        Some(dir) => {
            let mut n = st.runs.lock().unwrap_or_else(|p| p.into_inner());
            *n += 1;
            let path = dir.join(format!("run-{n}.cpplog"));
            let sink = FileSink::create(&path).map_err(|e| ServiceError::new("STORAGE_FAILURE", e.to_string()))?;
            Some(sink)
        }
        None => None,
    };
    let sink = BroadcastSink {
        file,
        tx: st.tx.clone(),
    };
    with(&st, |s| s.load_scenario(&req, Box::new(sink))).map_err(|mut e| {
        // anything wrong with the document itself is a validation failure
        if e.status != StatusCode::INTERNAL_SERVER_ERROR && e.status != StatusCode::CONFLICT {
            e.status = StatusCode::UNPROCESSABLE_ENTITY;
        }
        e
    })
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(|State(st): State<Shared>| async move { with(&st, |s| Ok(Health { loaded: s.is_loaded() })) }))
        .route("/load-scenario", post(load_scenario))
        .route("/state", get(|State(st): State<Shared>| async move { with(&st, |s| s.state()) }))
        .route("/realities-diff", get(|State(st): State<Shared>| async move { with(&st, |s| s.realities_diff()) }))
        .route("/enabled-tasks", get(|State(st): State<Shared>| async move { with(&st, |s| s.enabled_tasks()) }))
        .route(
            "/log",
            get(|State(st): State<Shared>, Query(q): Query<FromQuery>| async move { with(&st, |s| s.log(q.from)) }),
        )
        .route(
            "/assign",
            post(|State(st): State<Shared>, Json(b): Json<AssignBody>| async move {
                let call = b.call.resolve()?;
                with(&st, |s| s.assign(&call))
            }),
        )
        .route(
            "/start",
            post(|State(st): State<Shared>, Json(b): Json<ItemBody>| async move { with(&st, |s| s.start(b.item)) }),
        )
        .route(
            "/finish",
            post(|State(st): State<Shared>, Json(b): Json<FinishBody>| async move {
                let observed = b.observed.map(|o| (b.outcome.unwrap_or(OutcomeLabel::Outcome), o));
                with(&st, |s| s.finish(b.item, observed))
            }),
        )
        .route(
            "/inject-event",
            post(|State(st): State<Shared>, Json(b): Json<InjectBody>| async move {
                with(&st, |s| s.inject_event(&b.event, &b.args))
            }),
        )
        .route("/approve-plan", post(|State(st): State<Shared>| async move { with(&st, |s| s.approve_plan()) }))
        .route("/reject-plan", post(|State(st): State<Shared>| async move { with(&st, |s| s.reject_plan()) }))
        .route(
            "/manual/replace-remainder",
            post(|State(st): State<Shared>, Json(b): Json<ReplaceBody>| async move {
                let p = parse_process(&b.process).map_err(bad_request)?;
                with(&st, |s| s.replace_remainder(p))
            }),
        )
        .route("/manual/force-align", post(|State(st): State<Shared>| async move { with(&st, |s| s.force_align()) }))
        .route("/abort", post(|State(st): State<Shared>| async move { with(&st, |s| s.abort()) }))
        .route("/events", get(events))
        .with_state(state)
}

fn to_sse(r: &EventRecord) -> SseEvent {
    SseEvent::default()
        .id(r.sequence.to_string())
        .event(r.event.kind())
        .json_data(r)
        .expect("records serialize")
}

/// Push channel. With `?from=N` the stream first replays the current log
/// from N, then continues live.
async fn events(
    State(st): State<Shared>,
    Query(q): Query<EventsQuery>,
) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    // subscribe first so no record falls between backlog and live stream
    let rx = st.tx.subscribe();
    let backlog: Vec<EventRecord> = match q.from {
        Some(from) => {
            let s = st.service.lock().unwrap_or_else(|p| p.into_inner());
            s.log(from).unwrap_or_default()
        }
        None => Vec::new(),
    };
    let mut next = backlog.last().map(|r| r.sequence + 1);
    let live = BroadcastStream::new(rx).filter_map(move |r| {
        // lagged clients catch up through /log
        let r = r.ok()?;
        if r.sequence == 0 {
            // a new run restarts numbering
            next = None;
        }
        match next {
            Some(n) if r.sequence < n => None,
            _ => Some(r),
        }
    });
    let stream = tokio_stream::iter(backlog).chain(live).map(|r| Ok(to_sse(&r)));
    Sse::new(stream).keep_alive(KeepAlive::default())
}
