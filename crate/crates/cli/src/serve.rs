//! JSON annotation API over one triage session.
//!
//! Routes: `GET /api/session`, `GET /api/items?offset&limit`,
//! `POST /api/items/{id}/annotation` (body: tag array, or `{"tags": [...]}`),
//! `GET /api/report`. Errors are `{code, message}` objects. Writes are
//! serialized by a mutex and persisted before they become visible.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use toxens_core::features::SwearLexicon;
use toxens_core::triage::{frequency_report, Annotation, ErrorKind, Tag, TriageError, TriageItem, TriageSession};

use crate::CliError;

pub struct AppState {
    session: Mutex<TriageSession>,
    path: Option<PathBuf>,
    lexicon: Option<SwearLexicon>,
}

pub type Shared = Arc<AppState>;

impl AppState {
    /// With a `path`, every accepted annotation is saved there before the response.
    pub fn new(session: TriageSession, path: Option<PathBuf>, lexicon: Option<SwearLexicon>) -> Shared {
        Arc::new(Self {
            session: Mutex::new(session),
            path,
            lexicon,
        })
    }

    pub fn snapshot(&self) -> TriageSession {
        self.session.lock().expect("session lock").clone()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    status: StatusCode,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            status,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub focal_class: String,
    pub kind: ErrorKind,
    pub producer: String,
    pub seed: u64,
    pub population: usize,
    pub total: usize,
    pub annotated: usize,
    pub tags: Vec<Tag>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemState {
    Unannotated,
    Empty,
    Tagged,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItemView {
    pub id: String,
    pub text: String,
    pub gold: Vec<String>,
    pub score: f64,
    pub state: ItemState,
    pub tags: Vec<String>,
    /// Byte ranges of swear-lexicon matches in `text`.
    pub highlights: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItemPage {
    pub offset: usize,
    pub limit: usize,
    pub total: usize,
    pub items: Vec<ItemView>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnnotationBody {
    Tags(Vec<String>),
    Object { tags: Vec<String> },
}

pub const MAX_LIMIT: usize = 1000;
const DEFAULT_LIMIT: usize = 50;

fn item_view(s: &TriageSession, item: &TriageItem, lexicon: Option<&SwearLexicon>) -> ItemView {
    let (state, tags) = match s.annotation(&item.id) {
        Annotation::Unannotated => (ItemState::Unannotated, Vec::new()),
        Annotation::Empty => (ItemState::Empty, Vec::new()),
        Annotation::Tagged(t) => (ItemState::Tagged, t.iter().cloned().collect()),
    };
    ItemView {
        id: item.id.clone(),
        text: item.text.clone(),
        gold: item.gold.clone(),
        score: item.score,
        state,
        tags,
        highlights: lexicon.map(|l| l.spans(&item.text)).unwrap_or_default(),
    }
}

async fn session_view(State(st): State<Shared>) -> Json<SessionView> {
    let s = st.session.lock().expect("session lock");
    let (annotated, total) = s.progress();
    Json(SessionView {
        session_id: s.session_id.clone(),
        focal_class: s.focal_class.clone(),
        kind: s.kind,
        producer: s.producer.clone(),
        seed: s.seed,
        population: s.population,
        total,
        annotated,
        tags: s.taxonomy.tags(s.kind).to_vec(),
    })
}

fn query_usize(query: &str, key: &str) -> Result<Option<usize>, ApiError> {
    for pair in query.split('&').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
        if k == key {
            return v.parse().map(Some).map_err(|_| {
                ApiError::new(StatusCode::BAD_REQUEST, "bad_request", format!("`{key}` must be a non-negative integer"))
            });
        }
    }
    Ok(None)
}

async fn items(State(st): State<Shared>, RawQuery(q): RawQuery) -> Result<Json<ItemPage>, ApiError> {
    let q = q.unwrap_or_default();
    let offset = query_usize(&q, "offset")?.unwrap_or(0);
    let limit = query_usize(&q, "limit")?.unwrap_or(DEFAULT_LIMIT);
    if limit == 0 || limit > MAX_LIMIT {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            format!("`limit` must lie in 1..={MAX_LIMIT}"),
        ));
    }
    let s = st.session.lock().expect("session lock");
    let items = s
        .items
        .iter()
        .skip(offset)
        .take(limit)
        .map(|i| item_view(&s, i, st.lexicon.as_ref()))
        .collect();
    Ok(Json(ItemPage {
        offset,
        limit,
        total: s.items.len(),
        items,
    }))
}

async fn annotate(State(st): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Json<ItemView>, ApiError> {
    let tags = match serde_json::from_slice::<AnnotationBody>(&body) {
        Ok(AnnotationBody::Tags(t) | AnnotationBody::Object { tags: t }) => t,
        Err(e) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                format!("body must be a JSON array of tag ids: {e}"),
            ))
        }
    };
    let mut guard = st.session.lock().expect("session lock");
    if guard.item(&id).is_none() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown item `{id}`")));
    }
    let mut next = guard.clone();
    next.record_annotation(&id, &tags).map_err(|e| match e {
        TriageError::Validation(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_error", m),
        other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
    })?;
    if let Some(p) = &st.path {
        next.save(p)
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io_error", e.to_string()))?;
    }
    *guard = next;
    let item = guard.item(&id).expect("item checked above");
    Ok(Json(item_view(&guard, item, st.lexicon.as_ref())))
}

async fn report(State(st): State<Shared>) -> Response {
    let s = st.session.lock().expect("session lock");
    match frequency_report(&s) {
        Ok(r) => Json(r).into_response(),
        Err(e) => ApiError::new(StatusCode::CONFLICT, "nothing_annotated", e.to_string()).into_response(),
    }
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/session", get(session_view))
        .route("/api/items", get(items))
        .route("/api/items/{id}/annotation", post(annotate))
        .route("/api/report", get(report))
        .fallback(not_found)
        .with_state(state)
}

/// Serves on `127.0.0.1:port` until interrupted.
pub fn serve_blocking(state: Shared, port: u16) -> Result<(), CliError> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind port {port}: {e}")))?;
        eprintln!("annotation API on http://127.0.0.1:{port}/api/session");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))
    })
}
