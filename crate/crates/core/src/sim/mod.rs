//! Deterministic match runner.
//!
//! Two [`Agent`]s drive one [`ArbiterState`] to a verdict. Each agent owns a
//! seeded strategy, its secret tree and an [`AdversaryScript`]. Everything a
//! player sends is recorded in a [`Transcript`] in its wire encoding, which is
//! what the byte accounting and the privacy probe work from.

mod cost;
mod explore;
mod script;
mod strategy;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arbiter::{
    Action, Amount, ArbiterConfig, ArbiterError, ArbiterState, Ledger, PlayerId, Shot, Verdict,
};
use crate::board::BoardGeometry;
use crate::merkle::{BoardTree, CountingHasher, MerkleError, BLINDING_LEN};

pub use cost::{measure_round_cost, RoundCost};
pub use explore::{explore_miniature, ExplorationReport};
pub use script::{AdversaryScript, BadFleetKind};
pub use strategy::{HuntStrategy, Strategy};

use script::Agent;

/// Version tag written into reports; replays refuse reports from other versions.
pub const REPORT_VERSION: &str = concat!("battleship-sim/", env!("CARGO_PKG_VERSION"));

/// Seat ids used by the runner. Player A registers first and shoots first.
pub const PLAYER_A: &str = "A";
pub const PLAYER_B: &str = "B";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimConfig {
    pub arbiter: ArbiterConfig,
    pub deposit: Amount,
    pub blinding_len: usize,
}

impl SimConfig {
    pub fn with_move_window(mut self, ticks: u64) -> Self {
        self.arbiter.move_window = ticks;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.arbiter.validate()?;
        if self.deposit == 0 {
            return Err(SimError::Config("deposit must be positive".into()));
        }
        if !(BLINDING_LEN..=u8::MAX as usize).contains(&self.blinding_len) {
            return Err(SimError::Config(format!(
                "blinding length must be between {BLINDING_LEN} and 255 bytes"
            )));
        }
        Ok(())
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            arbiter: ArbiterConfig::default(),
            deposit: 100,
            blinding_len: BLINDING_LEN,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Arbiter(#[from] ArbiterError),
    #[error(transparent)]
    Merkle(#[from] MerkleError),
    #[error("fleet cannot be placed on this board")]
    Unplaceable,
    #[error("both players are silent and nobody can claim a timeout")]
    Deadlock,
    #[error("match did not finish within {0} steps")]
    StepLimit(usize),
    #[error("report was produced by {found}, this is {expected}")]
    VersionMismatch { expected: String, found: String },
    #[error("replay diverged from the report in field {0}")]
    Divergence(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WirePhase {
    Registration,
    Commit,
    Shooting,
    Reveal,
    /// Timeout claims and settlement.
    Closing,
}

impl fmt::Display for WirePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WirePhase::Registration => "registration",
            WirePhase::Commit => "commit",
            WirePhase::Shooting => "shooting",
            WirePhase::Reveal => "reveal",
            WirePhase::Closing => "closing",
        })
    }
}

/// Bytes one player put on the wire, split by protocol phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBytes {
    pub registration: u64,
    pub commit: u64,
    pub shooting: u64,
    pub reveal: u64,
    pub closing: u64,
}

impl PhaseBytes {
    fn add(&mut self, phase: WirePhase, n: usize) {
        let slot = match phase {
            WirePhase::Registration => &mut self.registration,
            WirePhase::Commit => &mut self.commit,
            WirePhase::Shooting => &mut self.shooting,
            WirePhase::Reveal => &mut self.reveal,
            WirePhase::Closing => &mut self.closing,
        };
        *slot += n as u64;
    }

    pub fn total(&self) -> u64 {
        self.registration + self.commit + self.shooting + self.reveal + self.closing
    }
}

/// Wire encoding of a player action: deposits as 8 big-endian bytes, roots
/// as 32 bytes, targets as one cell-index byte and proofs in their canonical
/// form. Ticks and settlement carry no payload.
pub fn wire_encoding(geometry: BoardGeometry, action: &Action) -> (WirePhase, Vec<u8>) {
    let index = |c| geometry.index_of(c).unwrap_or(u8::MAX);
    match action {
        Action::Register { deposit, .. } => (WirePhase::Registration, deposit.to_be_bytes().to_vec()),
        Action::CommitRoot { root, .. } => (WirePhase::Commit, root.0.to_vec()),
        Action::FirstShot { target, .. } => (WirePhase::Shooting, vec![index(*target)]),
        Action::PlayTurn {
            proof, next_target, ..
        } => {
            let mut bytes = proof.to_bytes();
            bytes.push(index(*next_target));
            (WirePhase::Shooting, bytes)
        }
        Action::RevealBoard { proofs, .. } => (
            WirePhase::Reveal,
            proofs.iter().flat_map(|p| p.to_bytes()).collect(),
        ),
        Action::Tick { .. } | Action::TimeoutClaim { .. } | Action::Settle => {
            (WirePhase::Closing, Vec::new())
        }
    }
}

/// One accepted player message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub sender: PlayerId,
    pub phase: WirePhase,
    pub kind: String,
    pub bytes: Vec<u8>,
    /// Cells of the sender whose leaves this message opens.
    pub opened_cells: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub messages: Vec<Message>,
}

impl Transcript {
    fn record(&mut self, geometry: BoardGeometry, action: &Action) {
        let Some(sender) = action.actor() else { return };
        let (phase, bytes) = wire_encoding(geometry, action);
        let opened_cells = match action {
            Action::PlayTurn { proof, .. } => vec![proof.cell_index()],
            Action::RevealBoard { proofs, .. } => proofs.iter().map(|p| p.cell_index()).collect(),
            _ => Vec::new(),
        };
        self.messages.push(Message {
            sender: sender.clone(),
            phase,
            kind: action.kind().to_string(),
            bytes,
            opened_cells,
        });
    }
}

/// Outcome of searching a transcript for secret leaf material.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyReport {
    /// (message, cell) pairs searched.
    pub checks: u64,
    /// Unopened leaf material found in a message.
    pub leaks: Vec<String>,
    /// Opened leaves found in the message opening them.
    /// A probe that finds no opened leaf is not looking at the right bytes.
    pub openings_found: u64,
    pub openings: u64,
}

impl PrivacyReport {
    pub fn is_clean(&self) -> bool {
        self.leaks.is_empty() && self.openings_found == self.openings && self.openings > 0
    }
}

/// The forms a leaf could leak in: as hashed (`size || r`), as framed on
/// the wire (`size || len || r`) and the bare blinding factor.
struct LeafSecret {
    needles: Vec<Vec<u8>>,
}

impl LeafSecret {
    fn new(leaf: &crate::merkle::LeafData) -> Self {
        let blinding = leaf
            .blinding
            .as_ref()
            .map(|b| b.as_bytes().to_vec())
            .unwrap_or_default();
        let mut framed = vec![leaf.ship_size, blinding.len() as u8];
        framed.extend_from_slice(&blinding);
        Self {
            needles: vec![leaf.encode().expect("tree leaves encode"), framed, blinding],
        }
    }

    fn found_in(&self, bytes: &[u8]) -> bool {
        self.needles.iter().any(|n| contains(bytes, n))
    }
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Searches every message for the leaf encoding and the blinding factor of
/// every cell not yet opened at that point, by either player.
pub fn privacy_probe(transcript: &Transcript, trees: &BTreeMap<PlayerId, BoardTree>) -> PrivacyReport {
    let mut report = PrivacyReport::default();
    let mut opened: BTreeMap<&PlayerId, Vec<bool>> = trees
        .iter()
        .map(|(id, t)| (id, vec![false; t.geometry().cell_count()]))
        .collect();
    let secrets: BTreeMap<&PlayerId, Vec<LeafSecret>> = trees
        .iter()
        .map(|(id, t)| {
            let cells = t.geometry().cell_count();
            (id, t.leaves()[..cells].iter().map(LeafSecret::new).collect())
        })
        .collect();

    for (m, message) in transcript.messages.iter().enumerate() {
        for (owner, leaves) in &secrets {
            let own = *owner == &message.sender;
            for (cell, secret) in leaves.iter().enumerate() {
                if opened[owner][cell] {
                    continue;
                }
                report.checks += 1;
                let found = secret.found_in(&message.bytes);
                if own && message.opened_cells.contains(&(cell as u8)) {
                    report.openings += 1;
                    if found {
                        report.openings_found += 1;
                    }
                } else if found {
                    report.leaks.push(format!(
                        "message {m} ({} from {}) contains leaf {cell} of {owner}",
                        message.kind, message.sender
                    ));
                }
            }
        }
        if let Some(flags) = opened.get_mut(&message.sender) {
            for &c in &message.opened_cells {
                if let Some(f) = flags.get_mut(c as usize) {
                    *f = true;
                }
            }
        }
    }
    report
}

/// Simulator output. Serializes to the JSON report format; two runs with the
/// same scripts, seed and config serialize identically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    pub version: String,
    pub script_a: AdversaryScript,
    pub script_b: AdversaryScript,
    pub seed: u64,
    pub config: SimConfig,
    pub verdict: Verdict,
    /// Shots fired by both players.
    pub turns: u64,
    /// Accepted first shots, turns and reveals.
    pub moves: u64,
    /// Every accepted arbiter action, clock ticks and settlement included.
    pub actions: u64,
    /// Player actions the arbiter rejected.
    pub rejected: u64,
    pub bytes_sent: BTreeMap<PlayerId, PhaseBytes>,
    /// Hash invocations spent by the arbiter verifying proofs.
    pub hash_invocations: u64,
    pub shot_log: Vec<Shot>,
    pub ledger: Ledger,
    pub final_clock: u64,
}

impl MatchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

/// A finished match with everything the report is derived from.
#[derive(Debug, Clone)]
pub struct MatchRun {
    pub report: MatchReport,
    pub transcript: Transcript,
    /// Committed trees by player.
    pub trees: BTreeMap<PlayerId, BoardTree>,
    /// Accepted actions in order, replayable through [`ArbiterState::apply`].
    pub actions: Vec<Action>,
    /// States after each accepted action, starting with the empty game.
    pub states: Vec<ArbiterState>,
}

pub fn run_match(
    script_a: AdversaryScript,
    script_b: AdversaryScript,
    seed: u64,
    config: &SimConfig,
) -> Result<MatchReport, SimError> {
    run_match_detailed(script_a, script_b, seed, config).map(|r| r.report)
}

struct Runner {
    geometry: BoardGeometry,
    hasher: CountingHasher,
    state: ArbiterState,
    transcript: Transcript,
    actions: Vec<Action>,
    states: Vec<ArbiterState>,
    rejected: u64,
    moves: u64,
}

impl Runner {
    fn submit(&mut self, action: Action) -> Result<(), ArbiterError> {
        let t = self.state.apply_with(&self.hasher, &action)?;
        self.transcript.record(self.geometry, &action);
        if matches!(
            action,
            Action::FirstShot { .. } | Action::PlayTurn { .. } | Action::RevealBoard { .. }
        ) {
            self.moves += 1;
        }
        self.state = t.state;
        self.actions.push(action);
        self.states.push(self.state.clone());
        Ok(())
    }
}

/// Runs a match and keeps the transcript, the trees and every state.
pub fn run_match_detailed(
    script_a: AdversaryScript,
    script_b: AdversaryScript,
    seed: u64,
    config: &SimConfig,
) -> Result<MatchRun, SimError> {
    config.validate()?;
    let geometry = config.arbiter.geometry;
    let mut agents = [
        Agent::new(PLAYER_A.into(), script_a, seed.wrapping_mul(2), config)?,
        Agent::new(
            PLAYER_B.into(),
            script_b,
            seed.wrapping_mul(2).wrapping_add(1),
            config,
        )?,
    ];
    let initial = ArbiterState::new(config.arbiter.clone())?;
    let mut run = Runner {
        geometry,
        hasher: CountingHasher::default(),
        state: initial.clone(),
        transcript: Transcript::default(),
        actions: Vec::new(),
        states: vec![initial],
        rejected: 0,
        moves: 0,
    };
    for agent in &agents {
        run.submit(Action::Register {
            player: agent.id.clone(),
            deposit: config.deposit,
        })?;
    }

    // Generous bound: every cell fired at by both players, each move
    // followed by a tick, plus commits, reveal and a timeout.
    let step_limit = 8 * geometry.cell_count() + 64;
    let mut steps = 0;
    while !run.state.phase.is_finished() {
        steps += 1;
        if steps > step_limit {
            return Err(SimError::StepLimit(step_limit));
        }
        let awaited = run.state.awaited();
        let mut acted = false;
        for agent in agents.iter_mut().filter(|a| awaited.contains(&a.id)) {
            let Some(action) = agent.decide(&run.state) else {
                continue;
            };
            match run.submit(action) {
                Ok(()) => acted = true,
                Err(_) => {
                    run.rejected += 1;
                    agent.stalled = true;
                }
            }
        }
        if acted {
            if !run.state.phase.is_finished() {
                run.submit(Action::Tick { ticks: 1 })?;
            }
            continue;
        }
        // Everyone awaited stayed silent: the other player waits out the
        // deadline and claims.
        let claimant = agents
            .iter()
            .map(|a| a.id.clone())
            .find(|id| !awaited.contains(id))
            .ok_or(SimError::Deadlock)?;
        let deadline = run.state.deadline.ok_or(SimError::Deadlock)?;
        if deadline > run.state.clock {
            run.submit(Action::Tick {
                ticks: deadline - run.state.clock,
            })?;
        }
        run.submit(Action::TimeoutClaim { claimant })?;
    }
    run.submit(Action::Settle)?;

    let verdict = run
        .state
        .phase
        .verdict()
        .cloned()
        .expect("loop exits on a finished phase");
    let mut bytes_sent: BTreeMap<PlayerId, PhaseBytes> = agents
        .iter()
        .map(|a| (a.id.clone(), PhaseBytes::default()))
        .collect();
    for m in &run.transcript.messages {
        bytes_sent
            .entry(m.sender.clone())
            .or_default()
            .add(m.phase, m.bytes.len());
    }
    let report = MatchReport {
        version: REPORT_VERSION.to_string(),
        script_a,
        script_b,
        seed,
        config: config.clone(),
        verdict,
        turns: run.state.shot_log.len() as u64,
        moves: run.moves,
        actions: run.actions.len() as u64,
        rejected: run.rejected,
        bytes_sent,
        hash_invocations: run.hasher.count(),
        shot_log: run.state.shot_log.clone(),
        ledger: run.state.transfers.clone(),
        final_clock: run.state.clock,
    };
    let trees = agents.into_iter().map(|a| (a.id.clone(), a.committed)).collect();
    Ok(MatchRun {
        report,
        transcript: run.transcript,
        trees,
        actions: run.actions,
        states: run.states,
    })
}

/// Re-runs the match a report describes.
pub fn replay(report: &MatchReport) -> Result<MatchReport, SimError> {
    if report.version != REPORT_VERSION {
        return Err(SimError::VersionMismatch {
            expected: REPORT_VERSION.to_string(),
            found: report.version.clone(),
        });
    }
    run_match(report.script_a, report.script_b, report.seed, &report.config)
}

/// Replays `report` and checks the result is identical to it.
pub fn verify_replay(report: &MatchReport) -> Result<MatchReport, SimError> {
    let again = replay(report)?;
    let checks: [(&'static str, bool); 6] = [
        ("verdict", again.verdict == report.verdict),
        ("shot_log", again.shot_log == report.shot_log),
        ("ledger", again.ledger == report.ledger),
        ("bytes_sent", again.bytes_sent == report.bytes_sent),
        (
            "hash_invocations",
            again.hash_invocations == report.hash_invocations,
        ),
        ("report", again == *report),
    ];
    match checks.iter().find(|(_, ok)| !ok) {
        Some((field, _)) => Err(SimError::Divergence(field)),
        None => Ok(again),
    }
}

/// Runs one match per seed, spreading the seeds over the available cores.
/// Results come back in seed order.
pub fn sweep(
    script_a: AdversaryScript,
    script_b: AdversaryScript,
    seeds: std::ops::Range<u64>,
    config: &SimConfig,
) -> Vec<Result<MatchReport, SimError>> {
    let seeds: Vec<u64> = seeds.collect();
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&s| run_match(script_a, script_b, s, config))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("match runner panicked"))
            .collect()
    })
}

/// True when the verdict names `winner` and the whole pot was paid to it once.
pub fn paid_to(report: &MatchReport, winner: &str) -> bool {
    let total = report.config.deposit * 2;
    report.verdict.winner.0 == winner
        && report.ledger.len() == 1
        && report.ledger[0].to.0 == winner
        && report.ledger[0].amount == total
}
