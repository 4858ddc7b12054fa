//! Session server for live two-player games.
//!
//! Players talk to a [`GameService`] over HTTP and a WebSocket (see
//! [`http::router`]). Every accepted action runs through the arbiter and is
//! appended to a per-game event log before it is acknowledged; on start the
//! logs are replayed to rebuild the games.

pub mod http;
pub mod model;
mod service;
pub mod store;

use thiserror::Error;

use battleship_core::ArbiterError;

pub use model::{
    Ack, ClientAction, GameConfig, GameId, GameSummary, Notification, NotificationEvent, PlayerView,
    PublicBoard, Session,
};
pub use service::{GameService, ServiceConfig};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown game {0}")]
    UnknownGame(String),
    #[error("missing or invalid session token")]
    Unauthorized,
    #[error("game already has two players")]
    GameFull,
    #[error("lobby has expired")]
    LobbyExpired,
    #[error("stale sequence {expected}, game is at {current}")]
    StaleSequence { expected: u64, current: u64 },
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error("manual clock control needs test mode")]
    TestModeDisabled,
    #[error(transparent)]
    Rejected(#[from] ArbiterError),
    #[error("event log {path} is corrupt: {why}")]
    CorruptLog { path: String, why: String },
    #[error("replaying game {game} failed at event {sequence}: {why}")]
    ReplayMismatch {
        game: String,
        sequence: u64,
        why: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
