//! HTTP and WebSocket front end.
//!
//! | route | |
//! |---|---|
//! | `POST /games` | create a game, returns the creator's session |
//! | `GET /games` | lobby listing |
//! | `POST /games/{id}/join` | join as the second player |
//! | `POST /games/{id}/actions` | submit a move (bearer token) |
//! | `GET /games/{id}/state` | player-scoped view (bearer token) |
//! | `GET /games/{id}/ws` | notifications (bearer token or `?token=`) |
//! | `POST /games/{id}/clock` | advance the clock, test mode only |

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

use crate::model::{ClientAction, GameConfig, Notification, NotificationEvent};
use crate::{GameService, ServiceError};

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub kind: String,
}

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownGame(_) => StatusCode::NOT_FOUND,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::GameFull | ServiceError::StaleSequence { .. } => StatusCode::CONFLICT,
            ServiceError::LobbyExpired => StatusCode::GONE,
            ServiceError::InvalidConfig(_) => StatusCode::BAD_REQUEST,
            ServiceError::TestModeDisabled => StatusCode::FORBIDDEN,
            ServiceError::Rejected(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::CorruptLog { .. }
            | ServiceError::ReplayMismatch { .. }
            | ServiceError::Io(_)
            | ServiceError::Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ServiceError::UnknownGame(_) => "unknown_game",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::GameFull => "game_full",
            ServiceError::LobbyExpired => "lobby_expired",
            ServiceError::StaleSequence { .. } => "stale_sequence",
            ServiceError::InvalidConfig(_) => "invalid_config",
            ServiceError::TestModeDisabled => "test_mode_disabled",
            ServiceError::Rejected(_) => "rejected",
            _ => "internal",
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.to_string(),
            kind: self.kind().to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}

/// Malformed request bodies.
struct BadRequest(String);

impl IntoResponse for BadRequest {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.0,
            kind: "bad_request".into(),
        };
        (StatusCode::BAD_REQUEST, Json(body)).into_response()
    }
}

enum ApiError {
    Service(ServiceError),
    Bad(BadRequest),
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::Service(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::Service(e) => e.into_response(),
            ApiError::Bad(b) => b.into_response(),
        }
    }
}

/// Parses a JSON body; an empty body reads as the default.
fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::Bad(BadRequest(e.to_string())))
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

fn require_token(headers: &HeaderMap) -> Result<&str, ServiceError> {
    bearer(headers).ok_or(ServiceError::Unauthorized)
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct CreateGameRequest {
    #[serde(default)]
    pub config: GameConfig,
    #[serde(default)]
    pub player: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct JoinRequest {
    #[serde(default)]
    pub player: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub action: ClientAction,
    #[serde(default)]
    pub expected_sequence: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClockRequest {
    pub ticks: u64,
}

#[derive(Debug, Deserialize)]
struct WsQuery {
    token: Option<String>,
}

pub fn router(service: GameService) -> Router {
    Router::new()
        .route("/games", post(create_game).get(list_games))
        .route("/games/{id}/join", post(join_game))
        .route("/games/{id}/actions", post(submit_action))
        .route("/games/{id}/state", get(get_state))
        .route("/games/{id}/clock", post(advance_clock))
        .route("/games/{id}/ws", get(socket))
        .with_state(service)
}

async fn create_game(State(service): State<GameService>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateGameRequest = parse_body(&body)?;
    let session = service.create_game(req.config, req.player)?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

async fn list_games(State(service): State<GameService>) -> Response {
    Json(service.list_games().await).into_response()
}

async fn join_game(
    State(service): State<GameService>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: JoinRequest = parse_body(&body)?;
    let session = service.join_game(&id, req.player).await?;
    Ok(Json(session).into_response())
}

async fn submit_action(
    State(service): State<GameService>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let token = require_token(&headers)?;
    let req: SubmitRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::Bad(BadRequest(e.to_string())))?;
    let ack = service
        .submit_action(&id, token, req.action, req.expected_sequence)
        .await?;
    Ok(Json(ack).into_response())
}

async fn get_state(
    State(service): State<GameService>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let token = require_token(&headers)?;
    Ok(Json(service.get_state(&id, token).await?).into_response())
}

async fn advance_clock(
    State(service): State<GameService>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    if !service.config().test_mode {
        return Err(ServiceError::TestModeDisabled.into());
    }
    let req: ClockRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::Bad(BadRequest(e.to_string())))?;
    if req.ticks == 0 {
        return Err(ApiError::Bad(BadRequest("ticks must be at least 1".into())));
    }
    Ok(Json(service.advance_clock(&id, req.ticks).await?).into_response())
}

async fn socket(
    State(service): State<GameService>,
    Path(id): Path<String>,
    Query(query): Query<WsQuery>,
    headers: HeaderMap,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let token = bearer(&headers)
        .map(str::to_string)
        .or(query.token)
        .ok_or(ServiceError::Unauthorized)?;
    // Authenticate before upgrading so a bad token gets a plain 401.
    let (view, rx) = service.subscribe(&id, &token).await?;
    Ok(ws.on_upgrade(move |socket| pump(socket, view, rx)))
}

async fn pump(
    mut socket: WebSocket,
    view: crate::PlayerView,
    mut rx: tokio::sync::broadcast::Receiver<Notification>,
) {
    let snapshot = Notification {
        sequence: view.sequence,
        phase: view.phase.clone(),
        event: NotificationEvent::Snapshot { view: Box::new(view) },
    };
    if send(&mut socket, &snapshot).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            note = rx.recv() => match note {
                Ok(note) => {
                    if send(&mut socket, &note).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(n)) => {
                    // The client has to refresh its view; close so it notices.
                    tracing::warn!(missed = n, "socket lagged, closing");
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
                Err(RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                // Moves go through POST; anything else from the client is ignored.
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn send(socket: &mut WebSocket, note: &Notification) -> Result<(), axum::Error> {
    let text = serde_json::to_string(note).expect("notifications serialize");
    socket.send(Message::Text(text.into())).await
}
