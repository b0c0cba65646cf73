//! HTTP routes.
//!
//! | method | path                     | body                                        |
//! |--------|--------------------------|---------------------------------------------|
//! | GET    | `/zones`                 |                                             |
//! | GET    | `/zones/{id}`            |                                             |
//! | PUT    | `/zones/{id}`            | `{"schedule"?, "limit"?, "honk_free"?}`     |
//! | POST   | `/zones/{id}/emergency`  | `{"state": "on" \| "off"}`                  |
//! | GET    | `/state`                 |                                             |
//! | GET    | `/metrics`               |                                             |
//! | POST   | `/sim`                   | `{"action": "start" \| "pause" \| "step" \| "speed", ...}` |
//! | POST   | `/scenario`              | scenario TOML document                      |
//! | POST   | `/config`                | `{"action": "save" \| "reload"}`            |
//! | GET    | `/trace?from=N`          | trace lines as text                         |
//! | GET    | `/events?from=N`         | server-sent events, one trace line each     |
//!
//! Errors are `{"error": "...", "field": "..."}` with status 400, 404, 409
//! or 500.

use std::convert::Infallible;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;
use zonegov::sim::ZoneView;
use zonegov::{Metrics, Scenario};

use crate::engine::{
    ApiError, ConfigAction, EngineHandle, ErrorKind, ServiceSnapshot, SimAction, SimStatus, ZonePatch,
};
use crate::hub::Indexed;

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.kind {
            ErrorKind::BadRequest => StatusCode::BAD_REQUEST,
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody {
            error: self.message,
            field: self.field,
        };
        (status, Json(body)).into_response()
    }
}

pub fn router(engine: EngineHandle) -> Router {
    Router::new()
        .route("/zones", get(list_zones))
        .route("/zones/{id}", get(get_zone).put(put_zone))
        .route("/zones/{id}/emergency", post(post_emergency))
        .route("/state", get(get_state))
        .route("/metrics", get(get_metrics))
        .route("/sim", post(post_sim))
        .route("/scenario", post(post_scenario))
        .route("/config", post(post_config))
        .route("/trace", get(get_trace))
        .route("/events", get(get_events))
        .with_state(engine)
}

/// Parse a JSON body, reporting the failing path as the error field.
fn parse_json<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let field = e
            .to_string()
            .split_once("unknown field `")
            .and_then(|(_, rest)| rest.split_once('`'))
            .map(|(f, _)| f.to_string());
        ApiError::bad_request(e.to_string(), field)
    })
}

async fn list_zones(State(engine): State<EngineHandle>) -> Json<Vec<ZoneView>> {
    Json(engine.snapshot().world.zones.clone())
}

async fn get_zone(State(engine): State<EngineHandle>, Path(id): Path<String>) -> Result<Json<ZoneView>, ApiError> {
    engine
        .snapshot()
        .world
        .zones
        .iter()
        .find(|z| z.config.id == id)
        .cloned()
        .map(Json)
        .ok_or_else(|| zonegov::ZoneError::UnknownZone(id).into())
}

async fn put_zone(
    State(engine): State<EngineHandle>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<zonegov::ZoneConfig>, ApiError> {
    let patch: ZonePatch = parse_json(&body)?;
    Ok(Json(engine.update_zone(id, patch).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmergencyBody {
    state: Toggle,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum Toggle {
    On,
    Off,
}

async fn post_emergency(
    State(engine): State<EngineHandle>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<zonegov::ZoneConfig>, ApiError> {
    let b: EmergencyBody = parse_json(&body)?;
    Ok(Json(engine.emergency(id, matches!(b.state, Toggle::On)).await?))
}

async fn get_state(State(engine): State<EngineHandle>) -> Json<ServiceSnapshot> {
    Json((*engine.snapshot()).clone())
}

async fn get_metrics(State(engine): State<EngineHandle>) -> Json<Metrics> {
    Json(engine.snapshot().world.metrics.clone())
}

async fn post_sim(State(engine): State<EngineHandle>, body: Bytes) -> Result<Json<SimStatus>, ApiError> {
    let action: SimAction = parse_json(&body)?;
    Ok(Json(engine.sim(action).await?))
}

async fn post_scenario(State(engine): State<EngineHandle>, body: Bytes) -> Result<Json<SimStatus>, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8", None))?;
    let scenario = Scenario::parse(text).map_err(|e| match e {
        zonegov::ScenarioError::Invalid { field, message } => ApiError::bad_request(message, Some(field)),
        other => ApiError::bad_request(other.to_string(), None),
    })?;
    Ok(Json(engine.load_scenario(scenario).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigBody {
    action: ConfigAction,
}

#[derive(Serialize)]
struct ConfigReply {
    zones: usize,
}

async fn post_config(State(engine): State<EngineHandle>, body: Bytes) -> Result<Json<ConfigReply>, ApiError> {
    let b: ConfigBody = parse_json(&body)?;
    Ok(Json(ConfigReply {
        zones: engine.config(b.action).await?,
    }))
}

#[derive(Deserialize)]
struct FromQuery {
    from: Option<usize>,
}

async fn get_trace(State(engine): State<EngineHandle>, Query(q): Query<FromQuery>) -> impl IntoResponse {
    let mut text = String::new();
    for i in engine.hub().since(q.from.unwrap_or(0)) {
        text.push_str(&i.event.to_line());
        text.push('\n');
    }
    (
        [(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")],
        text,
    )
}

/// Resume point: `?from=N` wins, else one past `Last-Event-ID`, else 0.
fn resume_index(q: &FromQuery, headers: &HeaderMap) -> usize {
    q.from.unwrap_or_else(|| {
        headers
            .get("last-event-id")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<usize>().ok())
            .map_or(0, |last| last + 1)
    })
}

fn sse_event(i: &Indexed) -> SseEvent {
    SseEvent::default()
        .id(i.index.to_string())
        .event(i.event.kind.as_str())
        .data(i.event.to_line())
}

async fn get_events(
    State(engine): State<EngineHandle>,
    Query(q): Query<FromQuery>,
    headers: HeaderMap,
) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let from = resume_index(&q, &headers);
    let (backlog, rx) = engine.hub().subscribe(from);
    let next = backlog.last().map_or(from, |i| i.index + 1);
    let backlog = stream::iter(backlog.into_iter().map(|i| Ok(sse_event(&i))));
    let live = stream::unfold(Some((rx, next)), |state| async move {
        let (mut rx, mut next) = state?;
        loop {
            match rx.recv().await {
                Ok(i) if i.index < next => continue,
                Ok(i) => {
                    next = i.index + 1;
                    return Some((Ok(sse_event(&i)), Some((rx, next))));
                }
                Err(RecvError::Lagged(missed)) => {
                    let msg = SseEvent::default()
                        .event("lagged")
                        .data(format!("missed {missed} events; reconnect with from={next}"));
                    return Some((Ok(msg), None));
                }
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(futures::StreamExt::chain(backlog, live)).keep_alive(KeepAlive::default())
}
