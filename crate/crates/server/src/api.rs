//! REST endpoints over a shared pipeline.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/api/themes` | theme summaries |
//! | GET | `/api/themes/{name}/memes?sort=&limit=` | meme summaries |
//! | GET | `/api/memes/{kind}/{value}` | meme detail |
//! | GET | `/api/memes/{kind}/{value}/network?format=` | export bytes |
//! | GET | `/api/memes/{kind}/{value}/timeseries?interval=` | time series |
//! | GET | `/api/memes/{kind}/{value}/tweets?limit=` | recent tweets, at most 200 |
//! | GET | `/api/memes/{kind}/{value}/cooccurrence?k=` | top partners |
//! | GET | `/api/users/{id}` | user stats |
//! | POST | `/api/annotations` | stored record |
//!
//! URL meme values travel base64url-encoded; other values are plain path
//! segments. Errors are `{"code": .., "message": ..}`.

use std::collections::HashMap;
use std::sync::{Arc, PoisonError, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};

use truthy_core::analytics::{AnalyticsError, Interval};
use truthy_core::annotations::{Label, Target};
use truthy_core::engine::{EngineError, MemeSort, DEFAULT_COOCCURRENCE_K, DEFAULT_RECENT_LIMIT};
use truthy_core::meme::{MemeKey, MemeKind};
use truthy_core::storage::ExportFormat;
use truthy_core::tweet::parse_timestamp;
use truthy_core::Pipeline;

/// Hard cap on tweets returned by the recent-tweets endpoint.
pub const TWEET_CAP: usize = DEFAULT_RECENT_LIMIT;
pub const DEFAULT_MEME_LIMIT: usize = 100;

pub type SharedPipeline = Arc<RwLock<Pipeline>>;

pub fn shared(pipeline: Pipeline) -> SharedPipeline {
    Arc::new(RwLock::new(pipeline))
}

pub fn read(p: &SharedPipeline) -> RwLockReadGuard<'_, Pipeline> {
    p.read().unwrap_or_else(PoisonError::into_inner)
}

pub fn write(p: &SharedPipeline) -> RwLockWriteGuard<'_, Pipeline> {
    p.write().unwrap_or_else(PoisonError::into_inner)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    extra: Option<(&'static str, Value)>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), extra: None }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match &e {
            EngineError::Analytics(AnalyticsError::UnknownMeme(_) | AnalyticsError::UnknownUser(_))
            | EngineError::UnknownTheme(_) => Self::not_found(e.to_string()),
            _ => {
                tracing::error!("request failed: {e}");
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let Some((k, v)) = self.extra {
            body[k] = v;
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Builds the router. `cors_origin` enables CORS for that origin only.
pub fn router(pipeline: SharedPipeline, cors_origin: Option<HeaderValue>) -> Router {
    let meme = "/api/memes/{kind}/{value}";
    let app = Router::new()
        .route("/api/themes", get(themes))
        .route("/api/themes/{name}/memes", get(theme_memes))
        .route(meme, get(meme_detail))
        .route(&format!("{meme}/network"), get(meme_network))
        .route(&format!("{meme}/timeseries"), get(meme_timeseries))
        .route(&format!("{meme}/tweets"), get(meme_tweets))
        .route(&format!("{meme}/cooccurrence"), get(meme_cooccurrence))
        .route("/api/users/{id}", get(user))
        .route("/api/annotations", post(annotate))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(pipeline);
    match cors_origin {
        Some(origin) => app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::exact(origin))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        ),
        None => app,
    }
}

/// Path form of a meme value: base64url for URLs, verbatim otherwise.
pub fn encode_meme_value(key: &MemeKey) -> String {
    match key.kind {
        MemeKind::Url => URL_SAFE_NO_PAD.encode(key.value.as_bytes()),
        _ => key.value.clone(),
    }
}

fn meme_key(kind: &str, value: &str) -> ApiResult<MemeKey> {
    let kind: MemeKind = kind.parse().map_err(|_| ApiError::not_found(format!("unknown meme kind `{kind}`")))?;
    let value = match kind {
        MemeKind::Url => {
            let bytes = URL_SAFE_NO_PAD
                .decode(value.trim_end_matches('='))
                .map_err(|_| ApiError::bad_request("invalid_meme_value", "url memes must be base64url-encoded"))?;
            String::from_utf8(bytes)
                .map_err(|_| ApiError::bad_request("invalid_meme_value", "decoded url is not UTF-8"))?
        }
        _ => value.to_string(),
    };
    MemeKey::new(kind, &value).map_err(|e| ApiError::bad_request("invalid_meme_value", e.to_string()))
}

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, name: &str, default: T) -> ApiResult<T>
where
    T::Err: std::fmt::Display,
{
    match q.get(name) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|e| ApiError::bad_request("invalid_parameter", format!("`{name}`: {e}"))),
    }
}

fn limit(q: &HashMap<String, String>, name: &str, default: usize) -> ApiResult<usize> {
    param::<usize>(q, name, default)
        .map_err(|_| ApiError::bad_request("invalid_parameter", format!("`{name}` must be a non-negative integer")))
}

async fn themes(State(p): State<SharedPipeline>) -> Json<Value> {
    Json(json!(read(&p).engine().themes_summary()))
}

async fn theme_memes(
    State(p): State<SharedPipeline>,
    Path(name): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let sort: MemeSort = param(&q, "sort", MemeSort::Tweets)?;
    let limit = limit(&q, "limit", DEFAULT_MEME_LIMIT)?;
    Ok(Json(json!(read(&p).engine().theme_memes(&name, sort, limit)?)))
}

async fn meme_detail(State(p): State<SharedPipeline>, Path((kind, value)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let key = meme_key(&kind, &value)?;
    Ok(Json(json!(read(&p).engine().meme_detail(&key)?)))
}

async fn meme_network(
    State(p): State<SharedPipeline>,
    Path((kind, value)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let key = meme_key(&kind, &value)?;
    let format: ExportFormat = param(&q, "format", ExportFormat::Json)?;
    let bytes = read(&p).engine().export_network(&key, format)?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], bytes).into_response())
}

async fn meme_timeseries(
    State(p): State<SharedPipeline>,
    Path((kind, value)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let key = meme_key(&kind, &value)?;
    let interval: Interval = param(&q, "interval", Interval::Hour)?;
    Ok(Json(json!(read(&p).engine().time_series(&key, interval)?)))
}

async fn meme_tweets(
    State(p): State<SharedPipeline>,
    Path((kind, value)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let key = meme_key(&kind, &value)?;
    let limit = limit(&q, "limit", TWEET_CAP)?.min(TWEET_CAP);
    Ok(Json(json!(read(&p).engine().recent_tweets(&key, limit)?)))
}

async fn meme_cooccurrence(
    State(p): State<SharedPipeline>,
    Path((kind, value)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let key = meme_key(&kind, &value)?;
    let k = limit(&q, "k", DEFAULT_COOCCURRENCE_K)?;
    Ok(Json(json!(read(&p).engine().cooccurrence_top(&key, k)?)))
}

async fn user(State(p): State<SharedPipeline>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let id: u64 = id
        .parse()
        .map_err(|_| ApiError::bad_request("invalid_parameter", format!("user id `{id}` is not an integer")))?;
    Ok(Json(json!(read(&p).engine().user_stats(id)?)))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TargetField {
    Text(String),
    Meme { meme: String },
    UserId { user_id: u64 },
    Handle { handle: String },
}

#[derive(Deserialize)]
struct AnnotationBody {
    annotator: String,
    target: TargetField,
    label: String,
    #[serde(default)]
    created_at: Option<String>,
}

fn parse_target(field: TargetField) -> ApiResult<Target> {
    let invalid = |e: &dyn std::fmt::Display| ApiError::bad_request("invalid_target", e.to_string());
    match field {
        TargetField::Text(s) => s.parse().map_err(|e| invalid(&e)),
        TargetField::Meme { meme } => meme.parse().map(Target::Meme).map_err(|e| invalid(&e)),
        TargetField::UserId { user_id } => Ok(Target::UserId(user_id)),
        TargetField::Handle { handle } => {
            format!("user:@{}", handle.trim_start_matches('@')).parse().map_err(|e| invalid(&e))
        }
    }
}

async fn annotate(State(p): State<SharedPipeline>, body: Bytes) -> ApiResult<Response> {
    let body: AnnotationBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("invalid_body", e.to_string()))?;
    let annotator = body.annotator.trim();
    if annotator.is_empty() {
        return Err(ApiError::bad_request("invalid_body", "annotator must not be empty"));
    }
    let label: Label = body.label.parse().map_err(|e: truthy_core::annotations::AnnotationError| {
        ApiError::bad_request("invalid_label", e.to_string())
    })?;
    let target = parse_target(body.target)?;
    let created_at = match &body.created_at {
        Some(ts) => parse_timestamp(ts).map_err(|e| ApiError::bad_request("invalid_body", e.to_string()))?,
        None => chrono::Utc::now(),
    };
    let record = write(&p).engine_mut().annotate(annotator, target, label, created_at)?;
    if record.unresolved {
        let mut err = ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "unresolved_target",
            format!("stored, but `{}` is not a tracked meme or user", record.target),
        );
        err.extra = Some(("record", json!(record)));
        return Err(err);
    }
    Ok((StatusCode::CREATED, Json(json!(record))).into_response())
}
