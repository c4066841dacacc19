use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::{json, Value};

use super::{
    Pagination, SearchService, ServiceError, API_VERSION, DEFAULT_PER_PAGE, DEFAULT_SEARCH_LIMIT, MAX_SEARCH_LIMIT,
};

type Params = Query<HashMap<String, String>>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

fn number(params: &HashMap<String, String>, key: &str, default: usize) -> Result<usize, ServiceError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => {
            v.trim().parse().map_err(|_| ServiceError::BadRequest(format!("{key} must be a non-negative integer")))
        }
    }
}

fn pagination(params: &HashMap<String, String>) -> Result<Pagination, ServiceError> {
    Pagination::new(number(params, "page", 1)?, number(params, "per_page", DEFAULT_PER_PAGE)?)
}

fn to_json<T: serde::Serialize>(value: T) -> Json<Value> {
    Json(serde_json::to_value(value).expect("serializable"))
}

async fn search(State(svc): State<Arc<SearchService>>, Query(params): Params) -> Result<Json<Value>, ServiceError> {
    let q = params.get("q").map(String::as_str).unwrap_or_default();
    let limit = number(&params, "limit", DEFAULT_SEARCH_LIMIT)?;
    if limit == 0 || limit > MAX_SEARCH_LIMIT {
        return Err(ServiceError::BadRequest(format!("limit must be between 1 and {MAX_SEARCH_LIMIT}")));
    }
    let results = svc.search_agents(q, limit);
    Ok(Json(json!({ "query": q, "results": results })))
}

async fn agent(State(svc): State<Arc<SearchService>>, Path(cui): Path<String>) -> Result<Json<Value>, ServiceError> {
    svc.get_agent(&cui).map(to_json)
}

async fn agent_interactions(
    State(svc): State<Arc<SearchService>>,
    Path(cui): Path<String>,
    Query(params): Params,
) -> Result<Json<Value>, ServiceError> {
    svc.agent_interactions(&cui, pagination(&params)?).map(to_json)
}

async fn interaction(
    State(svc): State<Arc<SearchService>>,
    Path(id): Path<String>,
    Query(params): Params,
) -> Result<Json<Value>, ServiceError> {
    svc.get_interaction(&id, pagination(&params)?).map(to_json)
}

async fn meta(State(svc): State<Arc<SearchService>>) -> Json<Value> {
    let store = svc.store();
    let manifest = svc.manifest().map(|m| serde_json::to_value(m).expect("serializable"));
    Json(json!({
        "api_version": API_VERSION,
        "manifest": manifest,
        "built_at": store.built_at(),
        "tau": store.tau(),
    }))
}

async fn not_found() -> ServiceError {
    ServiceError::NotFound("no such route".into())
}

/// JSON API over a search service.
pub fn router(service: Arc<SearchService>) -> Router {
    Router::new()
        .route("/api/agent/search", get(search))
        .route("/api/agent/{cui}", get(agent))
        .route("/api/agent/{cui}/interactions", get(agent_interactions))
        .route("/api/interaction/{id}", get(interaction))
        .route("/api/meta", get(meta))
        .fallback(not_found)
        .with_state(service)
}
