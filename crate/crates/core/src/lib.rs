//! Trustless Battleships: blinded Merkle board commitments, the rules engine,
//! the arbiter state machine that stands in for an on-chain contract, and a
//! deterministic match simulator with scripted cheaters.

pub mod arbiter;
pub mod board;
pub mod merkle;
pub mod rules;
pub mod sim;

pub use arbiter::{
    Action, Amount, ArbiterConfig, ArbiterError, ArbiterState, CheatReason, Effect, GamePhase, Ledger,
    PlayerId, Transfer, Transition, Verdict, VerdictKind,
};
pub use board::{BoardGeometry, Coordinate, CoordinateError, MAX_SHIP_SIZE};
pub use merkle::{
    encode_leaf, verify_proof, verify_proof_in, BlindingFactor, BoardTree, CountingHasher, Digest, LeafData,
    MerkleError, MerkleProof, NodeHasher, Sha256Hasher,
};
pub use rules::{
    audit_revealed_board, resolve_shot, validate_fleet, AuditFailure, AuditVerdict, BoardLayout, FleetSpec,
    Orientation, Placement, PlacementError, ShotKind, ShotOutcome,
};
pub use sim::{
    measure_round_cost, replay, run_match, AdversaryScript, MatchReport, RoundCost, SimConfig, SimError,
};
