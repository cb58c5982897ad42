use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::error::ServiceError;
use crate::store::{CreateSession, SessionEvent, SessionStore};

type Shared = Arc<SessionStore>;

#[derive(Debug, Clone, Default)]
pub struct RouterOptions {
    /// Browser origin allowed by CORS. `None` allows any origin.
    pub cors_origin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceBody {
    pub query_id: String,
    pub selected: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionBody {
    pub rating: String,
}

/// Turns axum's plain-text body rejections into our JSON errors.
fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

/// Work that simulates handshakes runs off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn create(
    State(store): State<Shared>,
    payload: Option<Json<serde_json::Value>>,
) -> Result<impl IntoResponse, ServiceError> {
    let req: CreateSession = match payload {
        Some(Json(v)) => serde_json::from_value(v).map_err(|e| ServiceError::BadRequest(e.to_string()))?,
        None => CreateSession::default(),
    };
    let state = blocking(move || store.create(req)).await?;
    Ok((StatusCode::CREATED, Json(state)))
}

async fn list(State(store): State<Shared>) -> impl IntoResponse {
    Json(store.ids())
}

async fn state(State(store): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(store.state(&id)?))
}

async fn query(State(store): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(store.query(&id)?))
}

async fn choice(
    State(store): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<ChoiceBody>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let req = body(payload)?;
    let state = blocking(move || store.choose(&id, &req.query_id, &req.selected)).await?;
    Ok(Json(state))
}

async fn satisfaction(
    State(store): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<SatisfactionBody>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let req = body(payload)?;
    let state = blocking(move || store.rate(&id, &req.rating)).await?;
    Ok(Json(state))
}

async fn belief(State(store): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(store.belief(&id)?))
}

async fn report(State(store): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    // Sent verbatim so the bytes match the harness output.
    let text = store.report_json(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

fn event(e: &SessionEvent) -> Event {
    Event::default()
        .event("state")
        .json_data(e)
        .expect("events serialize")
}

async fn events(
    State(store): State<Shared>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ServiceError> {
    let rx = store.subscribe();
    let first = SessionEvent {
        state: store.state(&id)?,
        belief: store.belief(&id)?.trace.last().copied(),
    };
    // A subscriber that falls behind skips ahead rather than failing.
    let updates = BroadcastStream::new(rx).filter_map(move |msg| match msg {
        Ok(e) if e.state.session_id == id => Some(Ok(event(&e))),
        _ => None,
    });
    let stream = tokio_stream::once(Ok(event(&first))).chain(updates);
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn health() -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn not_found() -> ServiceError {
    ServiceError::BadRequest("no such endpoint".into())
}

pub fn router(store: Arc<SessionStore>, opts: &RouterOptions) -> Router {
    let origin = match opts.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(v)) => AllowOrigin::exact(v),
        _ => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods(Any)
        .allow_headers(Any);
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(state))
        .route("/sessions/{id}/query", get(query))
        .route("/sessions/{id}/choice", post(choice))
        .route("/sessions/{id}/satisfaction", post(satisfaction))
        .route("/sessions/{id}/belief", get(belief))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/events", get(events))
        .fallback(not_found)
        .layer(cors)
        .with_state(store)
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, store: Arc<SessionStore>, opts: RouterOptions) -> std::io::Result<()> {
    axum::serve(listener, router(store, &opts))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
