//! HTTP endpoints. Reads are served from the [`ApiView`] the daemon
//! refreshes after every tick; writes are validated and enqueued.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use edgearm::model::{load_spec, parse_compose, parse_requirements, InfrastructureReport, InfrastructureSnapshot};
use edgearm::watcher::{Command, CommandQueue, FileUpdate};
use serde::Serialize;
use serde_json::json;

use crate::history::History;
use crate::status::AppStatus;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Files {
    pub compose: Option<String>,
    pub requirements: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppDetail {
    pub status: AppStatus,
    pub files: Files,
}

#[derive(Clone, Debug, Default)]
pub struct ApiView {
    pub apps: BTreeMap<String, AppDetail>,
    /// The report document exactly as published.
    pub report: Option<Vec<u8>>,
    pub snapshot: Option<InfrastructureSnapshot>,
    pub history: History,
}

pub type SharedView = Arc<RwLock<ApiView>>;

#[derive(Clone)]
pub struct ApiState {
    pub view: SharedView,
    pub queue: CommandQueue,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn not_found(what: impl std::fmt::Display) -> Response {
    error(StatusCode::NOT_FOUND, format!("{what} not found"))
}

fn read(state: &ApiState) -> std::sync::RwLockReadGuard<'_, ApiView> {
    state.view.read().unwrap_or_else(|e| e.into_inner())
}

fn enqueue(state: &ApiState, command: Command) -> Response {
    match state.queue.enqueue(command.clone()) {
        Ok(position) => (
            StatusCode::ACCEPTED,
            Json(json!({ "position": position, "command": command })),
        )
            .into_response(),
        Err(_) => error(StatusCode::BAD_REQUEST, "empty update"),
    }
}

async fn list_apps(State(state): State<ApiState>) -> Json<Vec<AppStatus>> {
    Json(read(&state).apps.values().map(|a| a.status.clone()).collect())
}

async fn get_app(State(state): State<ApiState>, Path(id): Path<String>) -> Response {
    let view = read(&state);
    let Some(app) = view.apps.get(&id) else { return not_found(format!("application `{id}`")) };
    Json(json!({
        "status": app.status,
        "files": app.files,
        "services": app.status.rows(),
    }))
    .into_response()
}

async fn put_files(State(state): State<ApiState>, Path(id): Path<String>, Json(update): Json<FileUpdate>) -> Response {
    let current = {
        let view = read(&state);
        match view.apps.get(&id) {
            Some(app) => app.files.clone(),
            None => return not_found(format!("application `{id}`")),
        }
    };
    if update.compose.is_none() && update.requirements.is_none() {
        return error(StatusCode::BAD_REQUEST, "no file in update");
    }
    if let Some(c) = &update.compose {
        if let Err(e) = parse_compose(c.as_bytes()) {
            return error(StatusCode::BAD_REQUEST, format!("compose: {e}"));
        }
    }
    if let Some(r) = &update.requirements {
        if let Err(e) = parse_requirements(r.as_bytes()) {
            return error(StatusCode::BAD_REQUEST, format!("requirements: {e}"));
        }
    }
    let compose = update.compose.as_ref().or(current.compose.as_ref());
    let requirements = update.requirements.as_ref().or(current.requirements.as_ref());
    if let Some(compose) = compose {
        if let Err(e) = load_spec(&id, compose.as_bytes(), requirements.map(|r| r.as_bytes())) {
            return error(StatusCode::BAD_REQUEST, e.to_string());
        }
    }
    enqueue(&state, Command::UpdateFiles { app_id: id, files: update })
}

async fn exec_app(State(state): State<ApiState>, Path(id): Path<String>) -> Response {
    if !read(&state).apps.contains_key(&id) {
        return not_found(format!("application `{id}`"));
    }
    enqueue(&state, Command::ExecApp { app_id: id })
}

async fn delete_app(State(state): State<ApiState>, Path(id): Path<String>) -> Response {
    if !read(&state).apps.contains_key(&id) {
        return not_found(format!("application `{id}`"));
    }
    enqueue(&state, Command::RemoveApp { app_id: id })
}

async fn infra(State(state): State<ApiState>) -> Response {
    let view = read(&state);
    Json(json!({
        "report": view.snapshot.as_ref().map(InfrastructureReport::from_snapshot),
        "nodes_alive": view.history.nodes_alive.points(),
    }))
    .into_response()
}

async fn raw_report(State(state): State<ApiState>) -> Response {
    match &read(&state).report {
        Some(bytes) => ([(header::CONTENT_TYPE, "application/json")], bytes.clone()).into_response(),
        None => not_found("infrastructure report"),
    }
}

async fn node(State(state): State<ApiState>, Path(id): Path<String>) -> Response {
    let view = read(&state);
    let Some(node) = view.snapshot.as_ref().and_then(|s| s.node(&id)) else {
        return not_found(format!("node `{id}`"));
    };
    let history = view.history.free_hw.get(id.as_str()).map(|r| r.points()).unwrap_or_default();
    Json(json!({ "node": node, "free_hw": history })).into_response()
}

async fn link(State(state): State<ApiState>, Path((a, b)): Path<(String, String)>) -> Response {
    let view = read(&state);
    let key = (a.as_str().into(), b.as_str().into());
    let Some(link) = view.snapshot.as_ref().and_then(|s| s.links().get(&key)) else {
        return not_found(format!("link {a}->{b}"));
    };
    let series = |m: &BTreeMap<_, crate::history::Ring>| m.get(&key).map(|r| r.points()).unwrap_or_default();
    Json(json!({
        "link": link,
        "latency_ms": series(&view.history.latency),
        "bandwidth_mbps": series(&view.history.bandwidth),
    }))
    .into_response()
}

async fn services_history(State(state): State<ApiState>) -> Response {
    Json(read(&state).history.services.points()).into_response()
}

pub fn router(state: ApiState) -> Router {
    Router::new()
        .route("/apps", get(list_apps))
        .route("/apps/{id}", get(get_app).delete(delete_app))
        .route("/apps/{id}/files", axum::routing::put(put_files))
        .route("/apps/{id}/exec", axum::routing::post(exec_app))
        .route("/infra", get(infra))
        .route("/infra/report", get(raw_report))
        .route("/infra/nodes/{id}", get(node))
        .route("/infra/links/{a}/{b}", get(link))
        .route("/history/services", get(services_history))
        .with_state(state)
}
