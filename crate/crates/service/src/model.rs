use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use battleship_core::arbiter::{PlayerRecord, Shot, DEFAULT_MOVE_WINDOW};
use battleship_core::{
    Action, Amount, ArbiterConfig, ArbiterState, BoardGeometry, Coordinate, Digest, Effect, FleetSpec,
    GamePhase, Ledger, MerkleProof, PlayerId, Verdict,
};

pub type GameId = String;

fn default_deposit() -> Amount {
    100
}

fn default_timeout() -> u64 {
    DEFAULT_MOVE_WINDOW
}

/// Terms both players agree to by joining. Fixed at creation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    #[serde(default = "default_deposit")]
    pub deposit: Amount,
    #[serde(default = "default_timeout")]
    pub timeout_ticks: u64,
    #[serde(default = "FleetSpec::standard")]
    pub fleet: FleetSpec,
    #[serde(default = "standard_geometry")]
    pub board: BoardGeometry,
}

fn standard_geometry() -> BoardGeometry {
    BoardGeometry::STANDARD
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            deposit: default_deposit(),
            timeout_ticks: default_timeout(),
            fleet: FleetSpec::standard(),
            board: BoardGeometry::STANDARD,
        }
    }
}

impl GameConfig {
    pub fn arbiter_config(&self) -> ArbiterConfig {
        ArbiterConfig {
            geometry: self.board,
            fleet: self.fleet.clone(),
            move_window: self.timeout_ticks,
        }
    }
}

/// Moves a player can submit. The acting player comes from the session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientAction {
    CommitRoot {
        root: Digest,
    },
    FirstShot {
        target: Coordinate,
    },
    PlayTurn {
        proof: MerkleProof,
        next_target: Coordinate,
    },
    RevealBoard {
        proofs: Vec<MerkleProof>,
    },
    TimeoutClaim,
}

impl ClientAction {
    pub fn into_action(self, player: PlayerId) -> Action {
        match self {
            ClientAction::CommitRoot { root } => Action::CommitRoot { player, root },
            ClientAction::FirstShot { target } => Action::FirstShot { player, target },
            ClientAction::PlayTurn { proof, next_target } => Action::PlayTurn {
                player,
                proof,
                next_target,
            },
            ClientAction::RevealBoard { proofs } => Action::RevealBoard { player, proofs },
            ClientAction::TimeoutClaim => Action::TimeoutClaim { claimant: player },
        }
    }

    /// The client form of a player action, if it is one.
    pub fn from_action(action: &Action) -> Option<(PlayerId, ClientAction)> {
        let client = match action.clone() {
            Action::CommitRoot { player, root } => (player, ClientAction::CommitRoot { root }),
            Action::FirstShot { player, target } => (player, ClientAction::FirstShot { target }),
            Action::PlayTurn {
                player,
                proof,
                next_target,
            } => (player, ClientAction::PlayTurn { proof, next_target }),
            Action::RevealBoard { player, proofs } => (player, ClientAction::RevealBoard { proofs }),
            Action::TimeoutClaim { claimant } => (claimant, ClientAction::TimeoutClaim),
            Action::Register { .. } | Action::Tick { .. } | Action::Settle => return None,
        };
        Some(client)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub game_id: GameId,
    pub player: PlayerId,
    pub session_token: String,
}

/// Public record of one player: its root and the cells it has opened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicBoard {
    pub player: PlayerId,
    pub root: Option<Digest>,
    /// Opened cells by index with their ship size.
    pub revealed: BTreeMap<u8, u8>,
}

impl From<&PlayerRecord> for PublicBoard {
    fn from(p: &PlayerRecord) -> Self {
        Self {
            player: p.id.clone(),
            root: p.root,
            revealed: p.reveals.clone(),
        }
    }
}

/// What a player may see of a game. Built only from public arbiter state:
/// roots, opened cells and the shot log. Blinding factors never appear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerView {
    pub game_id: GameId,
    pub you: PlayerId,
    pub sequence: u64,
    pub config: GameConfig,
    pub phase: GamePhase,
    pub clock: u64,
    pub deadline: Option<u64>,
    /// Players whose move is awaited.
    pub awaited: Vec<PlayerId>,
    pub pot: Amount,
    pub own: Option<PublicBoard>,
    pub opponent: Option<PublicBoard>,
    pub shots: Vec<Shot>,
    pub verdict: Option<Verdict>,
    pub ledger: Ledger,
}

impl PlayerView {
    pub fn project(
        game_id: &str,
        config: &GameConfig,
        sequence: u64,
        state: &ArbiterState,
        you: &PlayerId,
    ) -> Self {
        let own = state.player(you).map(PublicBoard::from);
        let opponent = state
            .opponent_of(you)
            .and_then(|o| state.player(o))
            .map(PublicBoard::from);
        Self {
            game_id: game_id.to_string(),
            you: you.clone(),
            sequence,
            config: config.clone(),
            phase: state.phase.clone(),
            clock: state.clock,
            deadline: state.deadline,
            awaited: state.awaited(),
            pot: state.pot,
            own,
            opponent,
            shots: state.shot_log.clone(),
            verdict: state.phase.verdict().cloned(),
            ledger: state.transfers.clone(),
        }
    }
}

/// Lobby entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSummary {
    pub game_id: GameId,
    pub phase: String,
    pub players: Vec<PlayerId>,
    pub config: GameConfig,
    pub clock: u64,
    /// Still accepting a second player.
    pub open: bool,
}

/// Pushed to every socket of a game after each accepted event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub sequence: u64,
    pub phase: GamePhase,
    pub event: NotificationEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NotificationEvent {
    /// Sent once when a socket connects.
    Snapshot { view: Box<PlayerView> },
    /// An accepted action and its public effects. Proofs are not repeated
    /// here; their opened cells show up as `cell_revealed` effects.
    Applied {
        kind: String,
        actor: Option<PlayerId>,
        effects: Vec<Effect>,
    },
}

/// Reply to an accepted submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub sequence: u64,
    pub phase: GamePhase,
    pub effects: Vec<Effect>,
}
