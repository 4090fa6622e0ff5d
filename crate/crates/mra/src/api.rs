//! HTTP surface: upload, list and inspect reports, look up terms, health.
//!
//! Handlers never run pipeline work inline. They write through the store,
//! enqueue report codes and read snapshots.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Request, State};
use axum::handler::HandlerWithoutStateExt;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use mra_core::lexicon::{lookup_term, Lexicon, LexiconTerm};
use mra_core::pipeline::{Pipeline, ReprocessError};
use mra_core::store::{Report, ReportSummary, StoreError};
use mra_core::translator::TranslationJob;
use mra_core::{Annotation, LanguageCode, ReportStatus};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

/// Owner recorded in the journal for mutations made by API handlers.
pub const API_OWNER: &str = "api";

/// Unit of every offset the API serves.
pub const OFFSET_UNIT: &str = "scalar";

#[derive(Clone)]
pub struct AppState {
    pub pipeline: Pipeline,
    pub lexicon: Arc<Lexicon>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnsupportedLanguage,
    EmptyText,
    TooLarge,
    InvalidEncoding,
    UnknownReport,
    UnknownTerm,
    NotFailed,
    BadRequest,
    NotFound,
    MethodNotAllowed,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::UnsupportedLanguage | ErrorCode::EmptyText | ErrorCode::BadRequest => {
                StatusCode::BAD_REQUEST
            }
            ErrorCode::TooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            ErrorCode::InvalidEncoding => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            ErrorCode::UnknownReport | ErrorCode::UnknownTerm | ErrorCode::NotFound => {
                StatusCode::NOT_FOUND
            }
            ErrorCode::NotFailed => StatusCode::CONFLICT,
            ErrorCode::MethodNotAllowed => StatusCode::METHOD_NOT_ALLOWED,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Every error body is exactly `{code, message}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.code == ErrorCode::Internal {
            tracing::error!(message = %self.message, "request failed");
        }
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::UnknownReport(_) => ErrorCode::UnknownReport,
            StoreError::EmptyText => ErrorCode::EmptyText,
            StoreError::TooLarge { .. } => ErrorCode::TooLarge,
            StoreError::UnsupportedLanguage(_) => ErrorCode::UnsupportedLanguage,
            StoreError::IllegalTransition(_) | StoreError::Rejected(_) | StoreError::Io(_) => {
                ErrorCode::Internal
            }
        };
        ApiError::new(code, e.to_string())
    }
}

/// Maps an extractor rejection, keeping body-limit failures distinct.
fn rejection(status: StatusCode, body: String) -> ApiError {
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new(ErrorCode::TooLarge, "request body is too large")
    } else {
        ApiError::bad_request(body)
    }
}

/// Row of the report list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryView {
    pub code: u64,
    pub category: String,
    pub original_language: LanguageCode,
    /// Creation time as `YYYY-MM-DD HH:MM` (UTC).
    pub date: String,
    pub created_at: DateTime<Utc>,
    pub processed: bool,
    pub status: ReportStatus,
}

impl From<ReportSummary> for SummaryView {
    fn from(s: ReportSummary) -> Self {
        SummaryView {
            code: s.code,
            category: s.category,
            original_language: s.original_language,
            date: display_date(s.created_at),
            created_at: s.created_at,
            processed: s.processed,
            status: s.status,
        }
    }
}

pub fn display_date(at: DateTime<Utc>) -> String {
    at.format("%Y-%m-%d %H:%M").to_string()
}

/// Everything the explorer needs about one report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportView {
    pub code: u64,
    pub category: String,
    pub original_language: LanguageCode,
    pub date: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub revision: u64,
    pub status: ReportStatus,
    pub processed: bool,
    pub original_text: String,
    pub translated_text: Option<String>,
    /// The text the annotation offsets refer to.
    pub english_text: Option<String>,
    pub failure_reason: Option<String>,
    pub translation_job: Option<TranslationJob>,
    pub offset_unit: String,
    pub annotations: Vec<Annotation>,
    pub dropped_annotations: usize,
}

impl From<Report> for ReportView {
    fn from(r: Report) -> Self {
        ReportView {
            date: display_date(r.created_at),
            processed: r.processed(),
            english_text: r.english_text().map(str::to_owned),
            code: r.code,
            category: r.category,
            original_language: r.original_language,
            created_at: r.created_at,
            updated_at: r.updated_at,
            revision: r.revision,
            status: r.status,
            original_text: r.original_text,
            translated_text: r.translated_text,
            failure_reason: r.failure_reason,
            translation_job: r.translation_job,
            offset_unit: OFFSET_UNIT.to_owned(),
            annotations: r.annotations,
            dropped_annotations: r.dropped_annotations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationsView {
    pub code: u64,
    pub status: ReportStatus,
    pub offset_unit: String,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Created {
    pub code: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub translator: String,
    pub annotator: String,
}

#[derive(Debug, Deserialize)]
struct UploadJson {
    category: Option<String>,
    language: Option<String>,
    text: Option<String>,
}

#[derive(Debug, Default)]
struct Upload {
    category: Option<String>,
    language: Option<String>,
    text: Option<String>,
}

/// Builds the router. When `ui_dir` is set, unmatched paths are served from it.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let limit = upload_limit(state.pipeline.store().config().max_text_bytes);
    let api = Router::new()
        .route("/reports", post(upload).get(list_reports))
        .route("/reports/{code}", get(get_report))
        .route("/reports/{code}/annotations", get(get_annotations))
        .route("/reports/{code}/reprocess", post(reprocess))
        .route("/terms/{id}", get(get_term))
        .route("/health", get(health))
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(
            ServeDir::new(dir)
                .append_index_html_on_directories(true)
                .not_found_service(not_found.into_service()),
        ),
        None => api.fallback(not_found),
    }
}

/// Body limit with room for multipart framing and JSON escapes.
fn upload_limit(max_text_bytes: usize) -> usize {
    max_text_bytes.saturating_mul(2).saturating_add(64 * 1024)
}

async fn not_found() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(ErrorCode::MethodNotAllowed, "method not allowed for this endpoint")
}

fn parse_code(raw: &str) -> Result<u64, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::new(ErrorCode::UnknownReport, format!("unknown report {raw:?}")))
}

fn decode(bytes: &[u8]) -> Result<String, ApiError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    String::from_utf8(bytes.to_vec())
        .map_err(|_| ApiError::new(ErrorCode::InvalidEncoding, "report text is not valid UTF-8"))
}

async fn read_upload(state: &AppState, request: Request) -> Result<Upload, ApiError> {
    let content_type = request
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_ascii_lowercase();

    if content_type.starts_with("multipart/form-data") {
        let mut multipart = Multipart::from_request(request, state)
            .await
            .map_err(|e| rejection(e.status(), e.body_text()))?;
        let mut upload = Upload::default();
        while let Some(field) = multipart
            .next_field()
            .await
            .map_err(|e| rejection(e.status(), e.body_text()))?
        {
            let name = field.name().unwrap_or_default().to_owned();
            let data = field
                .bytes()
                .await
                .map_err(|e| rejection(e.status(), e.body_text()))?;
            match name.as_str() {
                "category" => upload.category = Some(decode(&data)?),
                "language" => upload.language = Some(decode(&data)?),
                "file" | "text" => upload.text = Some(decode(&data)?),
                _ => {}
            }
        }
        return Ok(upload);
    }

    if !(content_type.is_empty() || content_type.starts_with("application/json")) {
        return Err(ApiError::new(
            ErrorCode::InvalidEncoding,
            format!("unsupported content type {content_type:?}"),
        ));
    }
    let body = Bytes::from_request(request, state)
        .await
        .map_err(|e| rejection(e.status(), e.body_text()))?;
    decode(&body)?;
    let json: UploadJson = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))?;
    Ok(Upload {
        category: json.category,
        language: json.language,
        text: json.text,
    })
}

async fn upload(State(state): State<AppState>, request: Request) -> Result<Response, ApiError> {
    let upload = read_upload(&state, request).await?;
    let language = upload
        .language
        .ok_or_else(|| ApiError::new(ErrorCode::UnsupportedLanguage, "language is required"))?;
    let text = upload.text.unwrap_or_default();
    let category = upload.category.unwrap_or_default();
    let report = state
        .pipeline
        .store()
        .create_report(&category, language.trim(), &text, API_OWNER)?;
    state.pipeline.enqueue(report.code);
    tracing::info!(code = report.code, language = %report.original_language, "report received");
    let location = format!("/reports/{}", report.code);
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, location)],
        Json(Created { code: report.code }),
    )
        .into_response())
}

async fn list_reports(State(state): State<AppState>) -> Json<Vec<SummaryView>> {
    let list = state.pipeline.store().list_reports();
    Json(list.into_iter().map(SummaryView::from).collect())
}

async fn get_report(
    State(state): State<AppState>,
    Path(code): Path<String>,
) -> Result<Json<ReportView>, ApiError> {
    let report = state.pipeline.store().load_report(parse_code(&code)?)?;
    Ok(Json(report.into()))
}

async fn get_annotations(
    State(state): State<AppState>,
    Path(code): Path<String>,
) -> Result<Json<AnnotationsView>, ApiError> {
    let report = state.pipeline.store().load_report(parse_code(&code)?)?;
    Ok(Json(AnnotationsView {
        code: report.code,
        status: report.status,
        offset_unit: OFFSET_UNIT.to_owned(),
        annotations: report.annotations,
    }))
}

async fn reprocess(
    State(state): State<AppState>,
    Path(code): Path<String>,
) -> Result<(StatusCode, Json<SummaryView>), ApiError> {
    match state.pipeline.reprocess(parse_code(&code)?, API_OWNER) {
        Ok(report) => Ok((StatusCode::ACCEPTED, Json(report.summary().into()))),
        Err(ReprocessError::UnknownReport(code)) => Err(ApiError::new(
            ErrorCode::UnknownReport,
            format!("unknown report {code}"),
        )),
        Err(e @ ReprocessError::NotFailed { .. }) => Err(ApiError::new(ErrorCode::NotFailed, e.to_string())),
        Err(ReprocessError::Store(e)) => Err(e.into()),
    }
}

async fn get_term(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<LexiconTerm>, ApiError> {
    lookup_term(&state.lexicon, &id)
        .map(|term| Json(term.clone()))
        .map_err(|_| ApiError::new(ErrorCode::UnknownTerm, format!("unknown term {id:?}")))
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        translator: state.pipeline.translator_name().into(),
        annotator: state.pipeline.annotator_name().into(),
    })
}
