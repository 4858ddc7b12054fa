//! Exhaustive exploration of the arbiter on the 2x2 board.
//!
//! Every reachable state is expanded with every action a player or the
//! environment could submit. Players draw from three trees: two valid
//! layouts and one with a ship cell missing, so wrong proofs and bad fleets
//! are part of the search. States are deduplicated with the clock shifted to
//! zero, which is sound because the arbiter only looks at `deadline - clock`.

use std::collections::{HashSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::arbiter::{Action, ArbiterConfig, ArbiterState, GamePhase, PlayerId, VerdictKind};
use crate::board::BoardGeometry;
use crate::merkle::{BoardTree, BLINDING_LEN};
use crate::rules::audit_revealed_board;

use super::{SimError, PLAYER_A, PLAYER_B};

const BOARDS: [[u8; 4]; 3] = [[2, 2, 0, 0], [2, 0, 2, 0], [2, 0, 0, 0]];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationReport {
    pub states: usize,
    pub transitions: usize,
    pub finished_states: usize,
    /// Finished states per verdict kind: legitimate, penalty, forfeit.
    pub verdicts: [usize; 3],
    pub violations: Vec<String>,
}

impl ExplorationReport {
    pub fn is_sound(&self) -> bool {
        self.violations.is_empty()
    }
}

fn normalized_key(state: &ArbiterState) -> ArbiterState {
    let mut s = state.clone();
    if let Some(d) = s.deadline {
        // Past deadlines collapse to one step past: claims only check `clock >= deadline`
        // and moves only check `clock <= deadline`.
        let rel = d as i64 - s.clock as i64;
        s.clock = 1;
        s.deadline = Some((rel.max(-1) + 1) as u64);
    } else {
        s.clock = 0;
    }
    s
}

struct Fixtures {
    geometry: BoardGeometry,
    trees: Vec<BoardTree>,
    players: [PlayerId; 2],
}

impl Fixtures {
    /// Candidate actions for `state`. Kinds the arbiter rejects outright in
    /// the current phase are left out; the arbiter tests cover those.
    fn actions(&self, state: &ArbiterState) -> Vec<Action> {
        let g = self.geometry;
        let cells = g.cell_count();
        let coords: Vec<_> = (0..cells)
            .map(|i| g.coordinate_of(i).expect("on board"))
            .collect();
        let mut out = vec![Action::Tick { ticks: 1 }];
        for p in &self.players {
            out.push(Action::TimeoutClaim { claimant: p.clone() });
        }
        match &state.phase {
            GamePhase::Registration => {
                out.push(Action::Register {
                    player: "C".into(),
                    deposit: 1,
                });
                for p in &self.players {
                    for deposit in [1, 2] {
                        out.push(Action::Register {
                            player: p.clone(),
                            deposit,
                        });
                    }
                }
            }
            GamePhase::Committing => {
                for p in &self.players {
                    for tree in &self.trees {
                        out.push(Action::CommitRoot {
                            player: p.clone(),
                            root: tree.root(),
                        });
                    }
                }
            }
            GamePhase::AwaitingFirstShot => {
                for p in &self.players {
                    for &target in &coords {
                        out.push(Action::FirstShot {
                            player: p.clone(),
                            target,
                        });
                    }
                }
            }
            GamePhase::AwaitingTurn { pending_target, .. } => {
                let pending = g.index_of(*pending_target).expect("pending target on board") as usize;
                for p in &self.players {
                    for tree in &self.trees {
                        let proof = tree.prove_cell(pending).expect("on board");
                        for &next_target in &coords {
                            out.push(Action::PlayTurn {
                                player: p.clone(),
                                proof: proof.clone(),
                                next_target,
                            });
                        }
                    }
                }
            }
            GamePhase::AwaitingReveal { .. } => {
                for p in &self.players {
                    out.push(Action::RevealBoard {
                        player: p.clone(),
                        proofs: Vec::new(),
                    });
                    for tree in &self.trees {
                        out.push(Action::RevealBoard {
                            player: p.clone(),
                            proofs: (0..cells)
                                .map(|i| tree.prove_cell(i).expect("on board"))
                                .collect(),
                        });
                    }
                }
            }
            GamePhase::Finished { .. } => out.push(Action::Settle),
        }
        out
    }

    fn board_of(&self, state: &ArbiterState, player: &PlayerId) -> Option<&[u8; 4]> {
        let root = state.player(player)?.root?;
        self.trees
            .iter()
            .position(|t| t.root() == root)
            .map(|i| &BOARDS[i])
    }
}

/// Explores every state reachable from the empty miniature game with a
/// move window of `move_window` ticks and checks, for each state and
/// transition:
///
/// * progress: a non-finished state has an accepted action besides a clock
///   tick, or a timeout claim becomes acceptable once the deadline passes;
/// * conservation of deposits and a single payout on settlement;
/// * committed roots never change;
/// * turns alternate between the players;
/// * nobody fires at the same cell twice;
/// * a legitimate win is only awarded for a board that passes the audit,
///   and a placement penalty only for one that fails it.
pub fn explore_miniature(move_window: u64) -> Result<ExplorationReport, SimError> {
    let config = ArbiterConfig::miniature(move_window);
    let geometry = config.geometry;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let trees = BOARDS
        .iter()
        .map(|b| BoardTree::build_in(geometry, b, BLINDING_LEN, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let fx = Fixtures {
        geometry,
        trees,
        players: [PLAYER_A.into(), PLAYER_B.into()],
    };

    let mut report = ExplorationReport::default();
    let initial = ArbiterState::new(config)?;
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(normalized_key(&initial));
    queue.push_back(initial);

    while let Some(state) = queue.pop_front() {
        report.states += 1;
        let mut violation = |msg: String| {
            if report.violations.len() < 32 {
                report.violations.push(msg);
            }
        };
        if !state.is_conserved() {
            violation(format!("deposits not conserved in {:?}", state.phase));
        }
        if let Some(v) = state.phase.verdict() {
            report.finished_states += 1;
            let slot = match v.kind {
                VerdictKind::LegitimateWin => 0,
                VerdictKind::CheatPenalty => 1,
                VerdictKind::TimeoutForfeit => 2,
            };
            report.verdicts[slot] += 1;
        }
        for shooter in &fx.players {
            let targets: Vec<_> = state.targets_of(shooter).collect();
            let unique: HashSet<_> = targets.iter().collect();
            if unique.len() != targets.len() {
                violation(format!("{shooter} fired at a cell twice"));
            }
        }

        let mut progress = false;
        for action in fx.actions(&state) {
            let Ok(t) = state.apply(&action) else { continue };
            report.transitions += 1;
            if !matches!(action, Action::Tick { .. }) {
                progress = true;
            }
            let next = t.state;
            for p in &state.players {
                if p.root.is_some() && next.player(&p.id).and_then(|q| q.root) != p.root {
                    violation(format!("root of {} changed", p.id));
                }
            }
            if let (
                Action::PlayTurn { .. },
                GamePhase::AwaitingTurn { player, .. },
                GamePhase::AwaitingTurn { player: after, .. },
            ) = (&action, &state.phase, &next.phase)
            {
                if player == after {
                    violation(format!("{player} moved twice in a row"));
                }
            }
            if matches!(action, Action::Settle) && state.pot > 0 {
                let winner = next.phase.verdict().map(|v| v.winner.clone());
                let paid = &next.transfers;
                if paid.len() != 1 || Some(&paid[0].to) != winner.as_ref() || paid[0].amount != state.pot {
                    violation(format!("settlement paid {paid:?}"));
                }
            }
            if !state.phase.is_finished() {
                if let Some(v) = next.phase.verdict() {
                    check_verdict(&fx, &next, v, &mut violation);
                }
            }
            if seen.insert(normalized_key(&next)) {
                queue.push_back(next);
            }
        }

        if !state.phase.is_finished() && !progress && !claimable(&state, &fx.players) {
            violation(format!("stuck in {:?} at clock {}", state.phase, state.clock));
        }
    }
    Ok(report)
}

fn claimable(state: &ArbiterState, players: &[PlayerId]) -> bool {
    let mut s = state.clone();
    if let Some(d) = s.deadline {
        if d > s.clock {
            s.clock = d;
        }
    }
    players
        .iter()
        .any(|p| s.apply(&Action::TimeoutClaim { claimant: p.clone() }).is_ok())
}

fn check_verdict(
    fx: &Fixtures,
    state: &ArbiterState,
    verdict: &crate::arbiter::Verdict,
    violation: &mut impl FnMut(String),
) {
    use crate::arbiter::CheatReason;
    let spec = &state.config.fleet;
    match (verdict.kind, verdict.reason) {
        (VerdictKind::LegitimateWin, _) => match fx.board_of(state, &verdict.winner) {
            Some(b) if audit_revealed_board(fx.geometry, b, spec).is_valid() => {}
            _ => violation(format!(
                "{} won with a board that fails the audit",
                verdict.winner
            )),
        },
        (VerdictKind::CheatPenalty, Some(CheatReason::InappropriatePlacement)) => {
            let loser = state.opponent_of(&verdict.winner).cloned();
            let board = loser.and_then(|l| fx.board_of(state, &l));
            if board.is_some_and(|b| audit_revealed_board(fx.geometry, b, spec).is_valid()) {
                violation(format!(
                    "valid board of the opponent of {} penalised",
                    verdict.winner
                ));
            }
        }
        _ => {}
    }
}
