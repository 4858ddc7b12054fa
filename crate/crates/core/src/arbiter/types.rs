use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{BoardGeometry, Coordinate, CoordinateError};
use crate::merkle::{Digest, MerkleProof};
use crate::rules::{FleetSpec, ShotOutcome};

/// Currency units held in escrow.
pub type Amount = u64;

/// Default number of ticks a player has to make their move.
pub const DEFAULT_MOVE_WINDOW: u64 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArbiterConfig {
    pub geometry: BoardGeometry,
    pub fleet: FleetSpec,
    pub move_window: u64,
}

impl ArbiterConfig {
    pub fn miniature(move_window: u64) -> Self {
        Self {
            geometry: BoardGeometry::MINIATURE,
            fleet: FleetSpec::miniature(),
            move_window,
        }
    }

    pub fn validate(&self) -> Result<(), ArbiterError> {
        if self.move_window == 0 {
            return Err(ArbiterError::InvalidConfig(
                "move window must be at least one tick",
            ));
        }
        if self.fleet.total_ship_cells() > self.geometry.cell_count() {
            return Err(ArbiterError::InvalidConfig("fleet does not fit on the board"));
        }
        Ok(())
    }
}

impl Default for ArbiterConfig {
    fn default() -> Self {
        Self {
            geometry: BoardGeometry::STANDARD,
            fleet: FleetSpec::standard(),
            move_window: DEFAULT_MOVE_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheatReason {
    Unresponsive,
    FakeProof,
    InappropriatePlacement,
    RefusedReveal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    LegitimateWin,
    CheatPenalty,
    TimeoutForfeit,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub winner: PlayerId,
    pub reason: Option<CheatReason>,
}

impl Verdict {
    pub fn legitimate(winner: PlayerId) -> Self {
        Self {
            kind: VerdictKind::LegitimateWin,
            winner,
            reason: None,
        }
    }

    pub fn penalty(winner: PlayerId, reason: CheatReason) -> Self {
        Self {
            kind: VerdictKind::CheatPenalty,
            winner,
            reason: Some(reason),
        }
    }

    pub fn forfeit(winner: PlayerId) -> Self {
        Self {
            kind: VerdictKind::TimeoutForfeit,
            winner,
            reason: Some(CheatReason::Unresponsive),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum GamePhase {
    Registration,
    Committing,
    AwaitingFirstShot,
    AwaitingTurn {
        player: PlayerId,
        pending_target: Coordinate,
    },
    AwaitingReveal {
        candidate: PlayerId,
    },
    Finished {
        verdict: Verdict,
    },
}

impl GamePhase {
    pub fn name(&self) -> &'static str {
        match self {
            GamePhase::Registration => "registration",
            GamePhase::Committing => "committing",
            GamePhase::AwaitingFirstShot => "awaiting_first_shot",
            GamePhase::AwaitingTurn { .. } => "awaiting_turn",
            GamePhase::AwaitingReveal { .. } => "awaiting_reveal",
            GamePhase::Finished { .. } => "finished",
        }
    }

    pub fn is_finished(&self) -> bool {
        matches!(self, GamePhase::Finished { .. })
    }

    pub fn verdict(&self) -> Option<&Verdict> {
        match self {
            GamePhase::Finished { verdict } => Some(verdict),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transfer {
    pub to: PlayerId,
    pub amount: Amount,
}

pub type Ledger = Vec<Transfer>;

/// Every input the arbiter accepts. Replaying a list of actions through
/// [`super::ArbiterState::apply`] reproduces the game exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Register {
        player: PlayerId,
        deposit: Amount,
    },
    CommitRoot {
        player: PlayerId,
        root: Digest,
    },
    FirstShot {
        player: PlayerId,
        target: Coordinate,
    },
    PlayTurn {
        player: PlayerId,
        proof: MerkleProof,
        next_target: Coordinate,
    },
    RevealBoard {
        player: PlayerId,
        proofs: Vec<MerkleProof>,
    },
    Tick {
        ticks: u64,
    },
    TimeoutClaim {
        claimant: PlayerId,
    },
    Settle,
}

impl Action {
    pub fn kind(&self) -> &'static str {
        match self {
            Action::Register { .. } => "register",
            Action::CommitRoot { .. } => "commit_root",
            Action::FirstShot { .. } => "first_shot",
            Action::PlayTurn { .. } => "play_turn",
            Action::RevealBoard { .. } => "reveal_board",
            Action::Tick { .. } => "tick",
            Action::TimeoutClaim { .. } => "timeout_claim",
            Action::Settle => "settle",
        }
    }

    pub fn actor(&self) -> Option<&PlayerId> {
        match self {
            Action::Register { player, .. }
            | Action::CommitRoot { player, .. }
            | Action::FirstShot { player, .. }
            | Action::PlayTurn { player, .. }
            | Action::RevealBoard { player, .. } => Some(player),
            Action::TimeoutClaim { claimant } => Some(claimant),
            Action::Tick { .. } | Action::Settle => None,
        }
    }
}

/// Observable consequences of an accepted action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    Registered {
        player: PlayerId,
        deposit: Amount,
    },
    RootCommitted {
        player: PlayerId,
        root: Digest,
    },
    ShotFired {
        shooter: PlayerId,
        target: Coordinate,
    },
    CellRevealed {
        owner: PlayerId,
        target: Coordinate,
        outcome: ShotOutcome,
    },
    BoardRevealed {
        owner: PlayerId,
    },
    Finished {
        verdict: Verdict,
    },
    Transferred {
        transfer: Transfer,
    },
    ClockAdvanced {
        clock: u64,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArbiterError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("{action} is not allowed in phase {phase}")]
    WrongPhase {
        action: &'static str,
        phase: &'static str,
    },
    #[error("player {0} is not registered in this game")]
    UnknownPlayer(PlayerId),
    #[error("it is not {0}'s move")]
    NotYourTurn(PlayerId),
    #[error("game already has two players")]
    GameFull,
    #[error("player {0} is already registered")]
    DuplicatePlayer(PlayerId),
    #[error("deposit must be positive")]
    ZeroDeposit,
    #[error("deposit {offered} does not match the first deposit {expected}")]
    UnequalDeposit { expected: Amount, offered: Amount },
    #[error("player {0} has already committed a root")]
    AlreadyCommitted(PlayerId),
    #[error("deadline {deadline} has passed (clock {clock})")]
    DeadlinePassed { deadline: u64, clock: u64 },
    #[error("deadline {deadline} not reached yet (clock {clock})")]
    DeadlineNotReached { deadline: u64, clock: u64 },
    #[error("nobody can be held responsible for a timeout in phase {0}")]
    NothingAwaited(&'static str),
    #[error("{0} is the party whose move is awaited")]
    DelinquentClaimant(PlayerId),
    #[error("target {0} was already fired at")]
    RepeatedTarget(Coordinate),
    #[error("invalid target: {0}")]
    InvalidTarget(#[from] CoordinateError),
    #[error("reveal is missing {missing} cells")]
    IncompleteReveal { missing: usize },
    #[error("tick count must be at least one")]
    ZeroTicks,
    #[error("game is not finished")]
    NotFinished,
}
