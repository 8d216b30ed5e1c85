use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value as J};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

use cordscope::analytics::export::{chord_json, cooccur_json, sankey_json, shares_json, timeseries_json};
use cordscope::analytics::{category_counts, papers_with_term, surface_counts, CountMode, ExportError, ExportOptions};
use cordscope::query::{
    evaluate_limited, parse_query, projection_names, ErrorKind, Expr, FromClause, Ident, Join, Path as QueryPath, Projection, Query,
    QueryError, SelectItem, VALUE_COLUMN,
};
use cordscope::EntityCategory;

use crate::error::ApiError;
use crate::extract::{Body, Params};
use crate::state::AppState;

pub const OPENAPI: &str = include_str!("../../../docs/openapi.json");
pub const DEFAULT_LIMIT: usize = 100;
pub const DEFAULT_SHARES_K: usize = 12;

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    /// Allowed origin; any origin when unset.
    pub cors_origin: Option<String>,
    /// Static files served under `/ui`.
    pub ui_dir: Option<PathBuf>,
}

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>, options: &ServerOptions) -> Router {
    let cors = CorsLayer::new().allow_methods([Method::GET, Method::POST]).allow_headers([header::CONTENT_TYPE]);
    let cors = match options.cors_origin.as_deref() {
        None | Some("*") => cors.allow_origin(Any),
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => cors.allow_origin(AllowOrigin::exact(v)),
            Err(_) => cors.allow_origin(Any),
        },
    };
    let mut app = Router::new()
        .route("/categories", get(categories))
        .route("/entities", get(entities))
        .route("/relations", get(relations))
        .route("/papers", get(papers))
        .route("/terms/{key}/timeseries", get(timeseries))
        .route("/analytics/shares", get(shares))
        .route("/analytics/cooccur", get(cooccur))
        .route("/analytics/sankey", get(sankey))
        .route("/analytics/chord", get(chord))
        .route("/query", post(query))
        .route("/admin/reload", post(reload))
        .route("/openapi.json", get(openapi))
        .route("/health", get(health));
    if let Some(dir) = &options.ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true));
    }
    app.fallback(|| async { ApiError::not_found("no such endpoint") })
        .method_not_allowed_fallback(|| async { ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed") })
        .layer(cors)
        .with_state(state)
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

fn category(name: &str, param: &str) -> Result<EntityCategory, ApiError> {
    EntityCategory::from_str(name)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "unknown_category", e.to_string()).with("parameter", param))
}

fn required<'a>(value: &'a Option<String>, param: &str) -> Result<&'a str, ApiError> {
    value.as_deref().ok_or_else(|| ApiError::bad_request(format!("missing query parameter `{param}`")).with("parameter", param))
}

fn mode(value: &Option<String>) -> Result<CountMode, ApiError> {
    value.as_deref().map_or(Ok(CountMode::Binary), |m| CountMode::from_str(m).map_err(ApiError::bad_request))
}

async fn health(State(state): Shared) -> Json<J> {
    let snap = state.snapshot();
    Json(json!({ "status": "ok", "documents": snap.papers.len(), "generation": snap.generation }))
}

async fn openapi() -> Response {
    json_bytes(OPENAPI.as_bytes().to_vec())
}

async fn categories(State(state): Shared) -> Response {
    Json(category_counts(&state.snapshot().papers)).into_response()
}

#[derive(Deserialize)]
struct EntitiesParams {
    category: Option<String>,
    limit: Option<usize>,
    offset: Option<usize>,
}

async fn entities(State(state): Shared, Params(p): Params<EntitiesParams>) -> Result<Response, ApiError> {
    let cat = category(required(&p.category, "category")?, "category")?;
    let rows: Vec<_> = surface_counts(&state.snapshot().papers, &cat)
        .into_iter()
        .skip(p.offset.unwrap_or(0))
        .take(p.limit.unwrap_or(DEFAULT_LIMIT))
        .collect();
    Ok(Json(rows).into_response())
}

/// `SELECT p.title AS paper_title, r.source.text AS source_text, ...
/// FROM papers p JOIN r IN p.relations WHERE ...`
pub fn relations_query(relation_type: Option<&str>, target_like: Option<&str>) -> Query {
    let item = |expr: Expr, alias: &str| SelectItem { expr, alias: Some(Ident::new(alias)) };
    let mut predicate = None;
    if let Some(t) = relation_type {
        predicate = Some(Expr::eq(Expr::path("r", &["relationType"]), Expr::string(t)));
    }
    if let Some(pattern) = target_like {
        let like = Expr::like(Expr::path("r", &["target", "text"]), pattern);
        predicate = Some(match predicate {
            Some(p) => Expr::and(p, like),
            None => like,
        });
    }
    Query {
        distinct: false,
        projection: Projection::Items(vec![
            item(Expr::path("p", &["title"]), "paper_title"),
            item(Expr::path("r", &["source", "text"]), "source_text"),
            item(Expr::path("r", &["target", "text"]), "target_text"),
            item(Expr::path("r", &["relationType"]), "relation_type"),
        ]),
        from: FromClause::Collection { name: Ident::new("papers"), alias: Ident::new("p") },
        joins: vec![Join { alias: Ident::new("r"), path: QueryPath::new("p", &["relations"]) }],
        predicate,
    }
}

#[derive(Deserialize)]
struct RelationsParams {
    #[serde(rename = "type")]
    relation_type: Option<String>,
    target_like: Option<String>,
    limit: Option<usize>,
}

async fn relations(State(state): Shared, Params(p): Params<RelationsParams>) -> Result<Response, ApiError> {
    let q = relations_query(p.relation_type.as_deref(), p.target_like.as_deref());
    let snap = state.snapshot();
    let limit = p.limit.unwrap_or(state.query_cap).min(state.query_cap);
    let (rows, _) = evaluate_limited(&q, &snap.documents, limit);
    let rows: Vec<J> = rows.iter().filter_map(|r| r.to_json()).collect();
    Ok(Json(rows).into_response())
}

#[derive(Deserialize)]
struct PapersParams {
    entity_key: Option<String>,
    limit: Option<usize>,
}

async fn papers(State(state): Shared, Params(p): Params<PapersParams>) -> Result<Response, ApiError> {
    let key = required(&p.entity_key, "entity_key")?;
    let rows: Vec<_> = papers_with_term(&state.snapshot().papers, key).into_iter().take(p.limit.unwrap_or(DEFAULT_LIMIT)).collect();
    Ok(Json(rows).into_response())
}

#[derive(Deserialize)]
struct TimeseriesParams {
    category: Option<String>,
    drop_unlinked: Option<bool>,
}

async fn timeseries(State(state): Shared, Path(key): Path<String>, Params(p): Params<TimeseriesParams>) -> Result<Response, ApiError> {
    let cat = p.category.as_deref().map(|c| category(c, "category")).transpose()?;
    let mut opts = ExportOptions::default();
    opts.rollup.drop_unlinked = p.drop_unlinked.unwrap_or(false);
    match timeseries_json(&state.snapshot().papers, cat.as_ref(), Some(&key), opts) {
        Ok(bytes) => Ok(json_bytes(bytes)),
        Err(e @ ExportError::UnknownTerm(_)) => Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_term", e.to_string())),
    }
}

#[derive(Deserialize)]
struct SharesParams {
    category: Option<String>,
    k: Option<usize>,
    drop_unlinked: Option<bool>,
}

async fn shares(State(state): Shared, Params(p): Params<SharesParams>) -> Result<Response, ApiError> {
    let cat = category(p.category.as_deref().unwrap_or("MedicationName"), "category")?;
    let mut opts = ExportOptions::default();
    opts.rollup.drop_unlinked = p.drop_unlinked.unwrap_or(false);
    Ok(json_bytes(shares_json(&state.snapshot().papers, &cat, p.k.unwrap_or(DEFAULT_SHARES_K), opts)))
}

#[derive(Deserialize)]
struct PairParams {
    rows: Option<String>,
    cols: Option<String>,
    top: Option<usize>,
    mode: Option<String>,
    drop_unlinked: Option<bool>,
}

impl PairParams {
    fn resolve(&self) -> Result<(EntityCategory, EntityCategory, ExportOptions), ApiError> {
        let rows = category(required(&self.rows, "rows")?, "rows")?;
        let cols = category(required(&self.cols, "cols")?, "cols")?;
        Ok((rows, cols, options(self.top, &self.mode, self.drop_unlinked)?))
    }
}

fn options(top: Option<usize>, m: &Option<String>, drop_unlinked: Option<bool>) -> Result<ExportOptions, ApiError> {
    let mut opts = ExportOptions { mode: mode(m)?, ..ExportOptions::default() };
    if let Some(top) = top {
        opts.top = top;
    }
    opts.rollup.drop_unlinked = drop_unlinked.unwrap_or(false);
    Ok(opts)
}

async fn cooccur(State(state): Shared, Params(p): Params<PairParams>) -> Result<Response, ApiError> {
    let (rows, cols, opts) = p.resolve()?;
    Ok(json_bytes(cooccur_json(&state.snapshot().papers, &rows, &cols, opts)))
}

async fn sankey(State(state): Shared, Params(p): Params<PairParams>) -> Result<Response, ApiError> {
    let (rows, cols, opts) = p.resolve()?;
    Ok(json_bytes(sankey_json(&state.snapshot().papers, &rows, &cols, opts)))
}

#[derive(Deserialize)]
struct ChordParams {
    category: Option<String>,
    top: Option<usize>,
    mode: Option<String>,
    drop_unlinked: Option<bool>,
}

async fn chord(State(state): Shared, Params(p): Params<ChordParams>) -> Result<Response, ApiError> {
    let cat = category(required(&p.category, "category")?, "category")?;
    let opts = options(p.top, &p.mode, p.drop_unlinked)?;
    Ok(json_bytes(chord_json(&state.snapshot().papers, &cat, opts)))
}

#[derive(Deserialize)]
struct QueryBody {
    sql: String,
    limit: Option<usize>,
}

pub fn query_error(e: &QueryError, sql: &str) -> ApiError {
    let code = match e.kind {
        ErrorKind::Syntax => "syntax_error",
        ErrorKind::Semantic => "semantic_error",
    };
    ApiError::new(StatusCode::BAD_REQUEST, code, e.to_string())
        .with("line", e.pos.line)
        .with("column", e.pos.column)
        .with("expected", e.expected.clone())
        .with("caret", e.render(sql))
}

async fn query(State(state): Shared, Body(body): Body<QueryBody>) -> Result<Response, ApiError> {
    let q = parse_query(&body.sql).map_err(|e| query_error(&e, &body.sql))?;
    let snap = state.snapshot();
    let limit = body.limit.unwrap_or(state.query_cap).min(state.query_cap);
    let (rows, truncated) = evaluate_limited(&q, &snap.documents, limit);
    let columns = match &q.projection {
        Projection::Items(items) => projection_names(items),
        Projection::Value(_) => vec![VALUE_COLUMN.to_string()],
    };
    let rows: Vec<J> = rows.iter().map(|r| r.to_json().unwrap_or(J::Null)).collect();
    Ok(Json(json!({ "columns": columns, "rows": rows, "count": rows.len(), "truncated": truncated })).into_response())
}

async fn reload(State(state): Shared) -> Result<Response, ApiError> {
    let state = state.clone();
    let snap = tokio::task::spawn_blocking(move || state.reload())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_error", e.to_string()))?;
    Ok(Json(json!({ "documents": snap.papers.len(), "generation": snap.generation })).into_response())
}
