//! JSON API under `/api`, authenticated with static bearer tokens.
//!
//! Mutations go through the store's single writer on a blocking thread;
//! statistics are computed from snapshots so long computations never hold
//! the writer lock.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequestParts, Path as UrlPath, Query, State};
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{middleware, Json, Router};
use labelwise_core::campaign::{DisagreementRecord, Round};
use labelwise_core::corpus::Annotation;
use labelwise_core::flagging::{ForumReport, DEFAULT_TAU_FORUM, DEFAULT_TAU_POST};
use labelwise_core::Label;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::Error;
use crate::files::read_json;
use crate::store::{unix_now, AssignmentList, CampaignSnapshot, RoundRequest, Store};
use crate::SCHEMA_VERSION;

pub const SCHEMA_HEADER: &str = "x-schema-version";

pub const ENV_ADDR: &str = "LABELWISE_ADDR";
pub const ENV_STORE: &str = "LABELWISE_STORE";
pub const ENV_TOKENS: &str = "LABELWISE_TOKENS";
pub const ENV_STATIC: &str = "LABELWISE_STATIC";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Annotator,
    Coordinator,
    Moderator,
}

/// The identity behind a bearer token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub annotator_id: String,
    pub role: Role,
}

/// Token file: a JSON object mapping each token to a [`Session`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenMap(HashMap<String, Session>);

impl TokenMap {
    pub fn load(path: &Path) -> crate::Result<TokenMap> {
        read_json(path)
    }

    pub fn insert(&mut self, token: impl Into<String>, annotator_id: impl Into<String>, role: Role) {
        self.0.insert(
            token.into(),
            Session {
                annotator_id: annotator_id.into(),
                role,
            },
        );
    }

    pub fn get(&self, token: &str) -> Option<&Session> {
        self.0.get(token)
    }
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<Store>>,
    tokens: Arc<TokenMap>,
}

impl AppState {
    pub fn new(store: Store, tokens: TokenMap) -> Self {
        AppState {
            store: Arc::new(Mutex::new(store)),
            tokens: Arc::new(tokens),
        }
    }

    pub fn store(&self) -> Arc<Mutex<Store>> {
        Arc::clone(&self.store)
    }

    fn snapshot(&self) -> crate::Snapshot {
        self.store.lock().expect("store lock").snapshot()
    }

    async fn write<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Store) -> crate::Result<T> + Send + 'static,
    {
        let store = Arc::clone(&self.store);
        tokio::task::spawn_blocking(move || f(&mut store.lock().expect("store lock")))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(ApiError::from)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Unknown { .. } => StatusCode::NOT_FOUND,
            Error::NotAssigned { .. } => StatusCode::FORBIDDEN,
            Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, r.body_text())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: &self.message })).into_response()
    }
}

impl FromRequestParts<AppState> for Session {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "missing bearer token"))?;
        state
            .tokens
            .get(token.trim())
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unknown token"))
    }
}

fn require(session: &Session, allowed: &[Role]) -> Result<(), ApiError> {
    if allowed.contains(&session.role) {
        Ok(())
    } else {
        Err(ApiError::new(
            StatusCode::FORBIDDEN,
            format!("role {:?} may not use this endpoint", session.role).to_lowercase(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEntry {
    pub value: u8,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentsResponse {
    pub scale: Vec<ScaleEntry>,
    #[serde(flatten)]
    pub assignments: AssignmentList,
}

pub fn scale() -> Vec<ScaleEntry> {
    Label::ALL
        .iter()
        .map(|l| ScaleEntry {
            value: l.value(),
            caption: l.caption().to_string(),
        })
        .collect()
}

async fn assignments(State(app): State<AppState>, session: Session) -> Result<Json<AssignmentsResponse>, ApiError> {
    let list = app.snapshot().assignments(&session.annotator_id)?;
    Ok(Json(AssignmentsResponse {
        scale: scale(),
        assignments: list,
    }))
}

#[derive(Debug, Clone, Deserialize)]
pub struct AnnotationBody {
    pub posting_id: String,
    pub label: i64,
}

async fn submit_annotation(
    State(app): State<AppState>,
    session: Session,
    body: Result<Json<AnnotationBody>, JsonRejection>,
) -> Result<Json<Annotation>, ApiError> {
    let Json(body) = body?;
    let label = Label::new(body.label).map_err(Error::from)?;
    let annotator = session.annotator_id;
    let stored = app
        .write(move |s| s.submit_annotation(&body.posting_id, &annotator, label, unix_now()))
        .await?;
    Ok(Json(stored))
}

async fn disagreements(
    State(app): State<AppState>,
    session: Session,
    UrlPath(round_id): UrlPath<String>,
) -> Result<Json<Vec<DisagreementRecord>>, ApiError> {
    require(&session, &[Role::Coordinator])?;
    Ok(Json(app.snapshot().disagreements(&round_id)?))
}

async fn stats(State(app): State<AppState>, _session: Session) -> Result<Json<CampaignSnapshot>, ApiError> {
    let snapshot = app.snapshot();
    let stats = tokio::task::spawn_blocking(move || snapshot.campaign_snapshot())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(stats))
}

#[derive(Debug, Clone, Deserialize)]
pub struct FlagQuery {
    pub tau_forum: Option<f64>,
    pub tau_post: Option<f64>,
}

fn threshold(name: &str, value: Option<f64>, default: f64) -> Result<f64, ApiError> {
    let v = value.unwrap_or(default);
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("{name} must lie in [0, 1], got {v}"),
        ))
    }
}

async fn flags(
    State(app): State<AppState>,
    session: Session,
    query: Result<Query<FlagQuery>, QueryRejection>,
) -> Result<Json<Vec<ForumReport>>, ApiError> {
    require(&session, &[Role::Moderator, Role::Coordinator])?;
    let Query(q) = query?;
    let tau_forum = threshold("tau_forum", q.tau_forum, DEFAULT_TAU_FORUM)?;
    let tau_post = threshold("tau_post", q.tau_post, DEFAULT_TAU_POST)?;
    Ok(Json(app.snapshot().flag_report(tau_post, tau_forum)))
}

async fn create_round(
    State(app): State<AppState>,
    session: Session,
    body: Result<Json<RoundRequest>, JsonRejection>,
) -> Result<Json<Round>, ApiError> {
    require(&session, &[Role::Coordinator])?;
    let Json(request) = body?;
    Ok(Json(app.write(move |s| s.create_round(request)).await?))
}

async fn schema_header(mut response: Response) -> Response {
    response
        .headers_mut()
        .insert(SCHEMA_HEADER, HeaderValue::from(SCHEMA_VERSION));
    response
}

/// All API routes; static files from `static_dir` are served for every
/// other path.
pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/assignments", get(assignments))
        .route("/api/annotations", post(submit_annotation))
        .route("/api/rounds", post(create_round))
        .route("/api/rounds/{id}/disagreements", get(disagreements))
        .route("/api/stats", get(stats))
        .route("/api/flags", get(flags))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(middleware::map_response(schema_header))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub store_dir: PathBuf,
    pub tokens: PathBuf,
    pub static_dir: Option<PathBuf>,
}

/// Binds, then serves until the process is stopped.
pub async fn serve(config: ServerConfig) -> crate::Result<()> {
    let store = Store::open(&config.store_dir)?;
    let tokens = TokenMap::load(&config.tokens)?;
    let app = router(AppState::new(store, tokens), config.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|e| Error::io(config.addr.to_string(), e))?;
    eprintln!("listening on http://{}", config.addr);
    axum::serve(listener, app)
        .await
        .map_err(|e| Error::io(config.addr.to_string(), e))
}
