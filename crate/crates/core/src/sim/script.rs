use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::arbiter::{Action, ArbiterState, GamePhase, PlayerId};
use crate::board::BoardGeometry;
use crate::merkle::{BoardTree, MerkleError};
use crate::rules::validate_fleet;

use super::strategy::{HuntStrategy, Strategy};
use super::{SimConfig, SimError};

/// How a committed layout breaks the fleet rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BadFleetKind {
    /// The smallest ship is left out.
    #[default]
    MissingShip,
    /// One extra occupied cell.
    ExtraCell,
    /// One ship has a cell knocked out of line.
    BentShip,
}

/// Player behaviour. Every non-honest script deviates from the protocol in
/// exactly its named way and plays honestly otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryScript {
    Honest,
    /// Proves every cell from a second tree over the board shifted one
    /// column, built right after committing.
    LocationChanger,
    BadFleet {
        layout: BadFleetKind,
    },
    /// Stops acting after this many of its own shooting moves.
    Unresponsive {
        after_turns: u32,
    },
    /// Flips one sibling byte in its first proof.
    FakeProof,
}

impl AdversaryScript {
    pub fn bad_fleet() -> Self {
        AdversaryScript::BadFleet {
            layout: BadFleetKind::MissingShip,
        }
    }

    pub fn is_honest(&self) -> bool {
        matches!(self, AdversaryScript::Honest)
    }
}

impl fmt::Display for AdversaryScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryScript::Honest => f.write_str("honest"),
            AdversaryScript::LocationChanger => f.write_str("location-changer"),
            AdversaryScript::BadFleet { layout } => {
                let kind = match layout {
                    BadFleetKind::MissingShip => "missing-ship",
                    BadFleetKind::ExtraCell => "extra-cell",
                    BadFleetKind::BentShip => "bent-ship",
                };
                write!(f, "bad-fleet:{kind}")
            }
            AdversaryScript::Unresponsive { after_turns } => write!(f, "unresponsive:{after_turns}"),
            AdversaryScript::FakeProof => f.write_str("fake-proof"),
        }
    }
}

impl FromStr for AdversaryScript {
    type Err = String;

    /// Accepts `honest`, `location-changer`, `bad-fleet[:missing-ship|extra-cell|bent-ship]`,
    /// `unresponsive[:k]` and `fake-proof`. Underscores work as well as dashes.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized = s.trim().to_ascii_lowercase().replace('_', "-");
        let (name, arg) = match normalized.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (normalized.as_str(), None),
        };
        let script = match (name, arg) {
            ("honest", None) => AdversaryScript::Honest,
            ("location-changer", None) => AdversaryScript::LocationChanger,
            ("fake-proof", None) => AdversaryScript::FakeProof,
            ("bad-fleet", kind) => AdversaryScript::BadFleet {
                layout: match kind {
                    None | Some("missing-ship") => BadFleetKind::MissingShip,
                    Some("extra-cell") => BadFleetKind::ExtraCell,
                    Some("bent-ship") => BadFleetKind::BentShip,
                    Some(other) => return Err(format!("unknown bad-fleet layout {other:?}")),
                },
            },
            ("unresponsive", k) => AdversaryScript::Unresponsive {
                after_turns: match k {
                    None => 0,
                    Some(k) => k.parse().map_err(|_| format!("invalid turn count {k:?}"))?,
                },
            },
            _ => return Err(format!("unknown script {s:?}")),
        };
        Ok(script)
    }
}

/// One simulated player: its secrets, its script and its targeting.
pub(crate) struct Agent {
    pub id: PlayerId,
    pub script: AdversaryScript,
    strategy: HuntStrategy,
    /// Tree whose root goes on record.
    pub committed: BoardTree,
    /// Tree proofs are drawn from; differs only for the location changer.
    proving: BoardTree,
    shooting_moves: u32,
    tampered: bool,
    /// Set once the arbiter rejected one of this agent's moves.
    pub stalled: bool,
}

impl Agent {
    pub fn new(
        id: PlayerId,
        script: AdversaryScript,
        seed: u64,
        config: &SimConfig,
    ) -> Result<Self, SimError> {
        let geometry = config.arbiter.geometry;
        let spec = &config.arbiter.fleet;
        let mut strategy = HuntStrategy::new(seed, geometry);
        let placements = strategy
            .choose_placements(geometry, spec)
            .ok_or(SimError::Unplaceable)?;
        let layout = validate_fleet(geometry, &placements, spec).map_err(|_| SimError::Unplaceable)?;
        let mut cells = layout.into_cells();
        if let AdversaryScript::BadFleet { layout } = script {
            corrupt_layout(geometry, &mut cells, layout);
        }

        let mut blinding_rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let build = |cells: &[u8], rng: &mut ChaCha20Rng| -> Result<BoardTree, MerkleError> {
            BoardTree::build_in(geometry, cells, config.blinding_len, rng)
        };
        let committed = build(&cells, &mut blinding_rng)?;
        let proving = if script == AdversaryScript::LocationChanger {
            build(&shift_columns(geometry, &cells), &mut blinding_rng)?
        } else {
            committed.clone()
        };
        Ok(Self {
            id,
            script,
            strategy,
            committed,
            proving,
            shooting_moves: 0,
            tampered: false,
            stalled: false,
        })
    }

    fn silent(&self) -> bool {
        match self.script {
            AdversaryScript::Unresponsive { after_turns } => self.shooting_moves >= after_turns,
            _ => false,
        }
    }

    /// The agent's next action when the arbiter is waiting on it, or `None`
    /// when it chooses (or is unable) to act.
    pub fn decide(&mut self, state: &ArbiterState) -> Option<Action> {
        if self.stalled {
            return None;
        }
        let geometry = state.config.geometry;
        let coord = |i: u8| {
            geometry
                .coordinate_of(i as usize)
                .expect("strategy targets are on the board")
        };
        match &state.phase {
            GamePhase::Committing => Some(Action::CommitRoot {
                player: self.id.clone(),
                root: self.committed.root(),
            }),
            GamePhase::AwaitingFirstShot => {
                if self.silent() {
                    return None;
                }
                let target = self.strategy.choose_target(&[])?;
                self.shooting_moves += 1;
                Some(Action::FirstShot {
                    player: self.id.clone(),
                    target: coord(target),
                })
            }
            GamePhase::AwaitingTurn { pending_target, .. } => {
                if self.silent() {
                    return None;
                }
                let pending = geometry.index_of(*pending_target).ok()?;
                let mut proof = self.proving.prove_cell(pending as usize).ok()?;
                if self.script == AdversaryScript::FakeProof && !self.tampered {
                    proof.siblings[0].0[0] ^= 0x01;
                    self.tampered = true;
                }
                let history: Vec<(u8, _)> = state
                    .shot_log
                    .iter()
                    .filter(|s| s.shooter == self.id)
                    .map(|s| {
                        (
                            geometry.index_of(s.target).expect("logged targets are valid"),
                            s.outcome,
                        )
                    })
                    .collect();
                // With no cells left the target is ignored anyway: only the
                // fleet-completing reveal can be legal here.
                let next = self.strategy.choose_target(&history).unwrap_or(pending);
                self.shooting_moves += 1;
                Some(Action::PlayTurn {
                    player: self.id.clone(),
                    proof,
                    next_target: coord(next),
                })
            }
            GamePhase::AwaitingReveal { .. } => {
                if self.silent() {
                    return None;
                }
                let known = &state.player(&self.id)?.reveals;
                let proofs = (0..geometry.cell_count())
                    .filter(|i| !known.contains_key(&(*i as u8)))
                    .map(|i| self.proving.prove_cell(i).expect("index on the board"))
                    .collect();
                Some(Action::RevealBoard {
                    player: self.id.clone(),
                    proofs,
                })
            }
            GamePhase::Registration | GamePhase::Finished { .. } => None,
        }
    }
}

fn shift_columns(geometry: BoardGeometry, cells: &[u8]) -> Vec<u8> {
    let cols = geometry.cols() as usize;
    let mut shifted = vec![0u8; cells.len()];
    for (i, &v) in cells.iter().enumerate() {
        let (row, col) = (i / cols, i % cols);
        shifted[row * cols + (col + 1) % cols] = v;
    }
    shifted
}

fn corrupt_layout(geometry: BoardGeometry, cells: &mut [u8], kind: BadFleetKind) {
    let smallest = cells.iter().copied().filter(|&v| v > 0).min().unwrap_or(0);
    match kind {
        BadFleetKind::MissingShip => {
            for v in cells.iter_mut().filter(|v| **v == smallest) {
                *v = 0;
            }
        }
        BadFleetKind::ExtraCell => {
            if let Some(free) = cells.iter().position(|&v| v == 0) {
                cells[free] = cells.iter().copied().max().unwrap_or(1).max(1);
            }
        }
        BadFleetKind::BentShip => {
            // Move the last cell of the smallest multi-cell ship off its line.
            let Some(size) = cells.iter().copied().filter(|&v| v > 1).min() else {
                return;
            };
            let run: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == size).collect();
            let anchor = geometry.coordinate_of(run[0]).expect("on board");
            let last = *run.last().expect("ship has cells");
            let off_line = (0..cells.len()).find(|&i| {
                let c = geometry.coordinate_of(i).expect("on board");
                cells[i] == 0 && c.row != anchor.row && c.col != anchor.col
            });
            if let Some(target) = off_line {
                cells[last] = 0;
                cells[target] = size;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{audit_revealed_board, FleetSpec};

    #[test]
    fn script_names_round_trip() {
        for s in [
            AdversaryScript::Honest,
            AdversaryScript::LocationChanger,
            AdversaryScript::bad_fleet(),
            AdversaryScript::BadFleet {
                layout: BadFleetKind::BentShip,
            },
            AdversaryScript::Unresponsive { after_turns: 7 },
            AdversaryScript::FakeProof,
        ] {
            assert_eq!(s.to_string().parse::<AdversaryScript>().unwrap(), s);
        }
        assert_eq!(
            "bad_fleet".parse::<AdversaryScript>().unwrap(),
            AdversaryScript::bad_fleet()
        );
        assert_eq!(
            "unresponsive".parse::<AdversaryScript>().unwrap(),
            AdversaryScript::Unresponsive { after_turns: 0 }
        );
        assert!("sneaky".parse::<AdversaryScript>().is_err());
    }

    #[test]
    fn corrupted_layouts_fail_the_audit() {
        let g = BoardGeometry::STANDARD;
        let spec = FleetSpec::standard();
        for kind in [
            BadFleetKind::MissingShip,
            BadFleetKind::ExtraCell,
            BadFleetKind::BentShip,
        ] {
            for seed in 0..20 {
                let agent = Agent::new(
                    "X".into(),
                    AdversaryScript::BadFleet { layout: kind },
                    seed,
                    &SimConfig::default(),
                )
                .unwrap();
                let cells = agent.committed.cells();
                let occupied = cells.iter().filter(|&&v| v != 0).count();
                let expected = match kind {
                    BadFleetKind::MissingShip => 14,
                    BadFleetKind::ExtraCell => 16,
                    BadFleetKind::BentShip => 15,
                };
                assert_eq!(occupied, expected, "{kind:?} seed {seed}");
                assert!(
                    !audit_revealed_board(g, &cells, &spec).is_valid(),
                    "{kind:?} seed {seed}"
                );
            }
        }
    }

    #[test]
    fn location_changer_proves_from_a_shifted_board() {
        let agent = Agent::new(
            "X".into(),
            AdversaryScript::LocationChanger,
            4,
            &SimConfig::default(),
        )
        .unwrap();
        assert_ne!(agent.committed.root(), agent.proving.root());
        let committed = agent.committed.cells();
        let shifted = agent.proving.cells();
        assert_eq!(shifted, shift_columns(BoardGeometry::STANDARD, &committed));
    }
}
