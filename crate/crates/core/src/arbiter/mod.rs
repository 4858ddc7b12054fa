//! The arbiter: a deterministic phase machine playing the role of the game
//! contract.
//!
//! Phases run registration, committing, first shot, alternating proof-carrying
//! turns, the candidate winner's full reveal, then finished. Every transition
//! is a pure function `(state, action) -> (state, effects)`; rejected actions
//! leave the state untouched while detected cheating finishes the game.
//!
//! Deadlines are logical ticks. Expiry never changes state by itself; the
//! waiting party has to file a timeout claim, as it would on chain.

mod types;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::board::Coordinate;
use crate::merkle::{verify_proof_in, Digest, MerkleProof, NodeHasher, Sha256Hasher};
use crate::rules::{audit_revealed_board, classify_reveal, ShotKind, ShotOutcome};

pub use types::*;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlayerRecord {
    pub id: PlayerId,
    pub deposit: Amount,
    /// Write-once board commitment.
    pub root: Option<Digest>,
    /// Cells of this player's own board admitted through verified proofs.
    pub reveals: BTreeMap<u8, u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shot {
    pub shooter: PlayerId,
    pub target: Coordinate,
    /// Filled in once the defender has proven the cell.
    pub outcome: Option<ShotOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArbiterState {
    pub config: ArbiterConfig,
    pub phase: GamePhase,
    /// First registrant at index 0. The first registrant fires first.
    pub players: Vec<PlayerRecord>,
    pub shot_log: Vec<Shot>,
    pub clock: u64,
    pub deadline: Option<u64>,
    pub pot: Amount,
    pub transfers: Ledger,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub state: ArbiterState,
    pub effects: Vec<Effect>,
}

impl Transition {
    /// Outcome announced by a `play_turn`, if this transition contains one.
    pub fn shot_outcome(&self) -> Option<ShotOutcome> {
        self.effects.iter().find_map(|e| match e {
            Effect::CellRevealed { outcome, .. } => Some(*outcome),
            _ => None,
        })
    }
}

impl ArbiterState {
    pub fn new(config: ArbiterConfig) -> Result<Self, ArbiterError> {
        config.validate()?;
        Ok(Self {
            config,
            phase: GamePhase::Registration,
            players: Vec::with_capacity(2),
            shot_log: Vec::new(),
            clock: 0,
            deadline: None,
            pot: 0,
            transfers: Vec::new(),
        })
    }

    pub fn seat_of(&self, player: &PlayerId) -> Option<usize> {
        self.players.iter().position(|p| &p.id == player)
    }

    pub fn player(&self, player: &PlayerId) -> Option<&PlayerRecord> {
        self.players.iter().find(|p| &p.id == player)
    }

    pub fn opponent_of(&self, player: &PlayerId) -> Option<&PlayerId> {
        let seat = self.seat_of(player)?;
        self.players.get(1 - seat).map(|p| &p.id)
    }

    pub fn total_deposits(&self) -> Amount {
        self.players.iter().map(|p| p.deposit).sum()
    }

    /// Escrowed pot plus paid transfers equals everything deposited.
    pub fn is_conserved(&self) -> bool {
        let paid: Amount = self.transfers.iter().map(|t| t.amount).sum();
        self.pot + paid == self.total_deposits()
    }

    /// Players whose move the game is waiting on.
    pub fn awaited(&self) -> Vec<PlayerId> {
        match &self.phase {
            GamePhase::Committing => self
                .players
                .iter()
                .filter(|p| p.root.is_none())
                .map(|p| p.id.clone())
                .collect(),
            GamePhase::AwaitingFirstShot => vec![self.players[0].id.clone()],
            GamePhase::AwaitingTurn { player, .. } => vec![player.clone()],
            GamePhase::AwaitingReveal { candidate } => vec![candidate.clone()],
            GamePhase::Registration | GamePhase::Finished { .. } => Vec::new(),
        }
    }

    /// Targets `shooter` has already fired at.
    pub fn targets_of<'a>(&'a self, shooter: &'a PlayerId) -> impl Iterator<Item = Coordinate> + 'a {
        self.shot_log
            .iter()
            .filter(move |s| &s.shooter == shooter)
            .map(|s| s.target)
    }

    pub fn apply(&self, action: &Action) -> Result<Transition, ArbiterError> {
        self.apply_with(&Sha256Hasher, action)
    }

    /// Applies one action, verifying proofs with `hasher`.
    pub fn apply_with(&self, hasher: &dyn NodeHasher, action: &Action) -> Result<Transition, ArbiterError> {
        let mut next = self.clone();
        let mut effects = Vec::new();
        match action {
            Action::Register { player, deposit } => next.do_register(player, *deposit, &mut effects)?,
            Action::CommitRoot { player, root } => next.do_commit(player, *root, &mut effects)?,
            Action::FirstShot { player, target } => next.do_first_shot(player, *target, &mut effects)?,
            Action::PlayTurn {
                player,
                proof,
                next_target,
            } => next.do_play_turn(hasher, player, proof, *next_target, &mut effects)?,
            Action::RevealBoard { player, proofs } => next.do_reveal(hasher, player, proofs, &mut effects)?,
            Action::Tick { ticks } => {
                if *ticks == 0 {
                    return Err(ArbiterError::ZeroTicks);
                }
                next.clock += ticks;
                effects.push(Effect::ClockAdvanced { clock: next.clock });
            }
            Action::TimeoutClaim { claimant } => next.do_timeout_claim(claimant, &mut effects)?,
            Action::Settle => next.do_settle(&mut effects)?,
        }
        Ok(Transition { state: next, effects })
    }

    pub fn register(&self, player: impl Into<PlayerId>, deposit: Amount) -> Result<Self, ArbiterError> {
        self.apply(&Action::Register {
            player: player.into(),
            deposit,
        })
        .map(|t| t.state)
    }

    pub fn commit_root(&self, player: impl Into<PlayerId>, root: Digest) -> Result<Self, ArbiterError> {
        self.apply(&Action::CommitRoot {
            player: player.into(),
            root,
        })
        .map(|t| t.state)
    }

    pub fn first_shot(&self, player: impl Into<PlayerId>, target: Coordinate) -> Result<Self, ArbiterError> {
        self.apply(&Action::FirstShot {
            player: player.into(),
            target,
        })
        .map(|t| t.state)
    }

    /// Returns the new state and the announced outcome. A detected fake proof
    /// yields a finished state and no outcome.
    pub fn play_turn(
        &self,
        player: impl Into<PlayerId>,
        proof: MerkleProof,
        next_target: Coordinate,
    ) -> Result<(Self, Option<ShotOutcome>), ArbiterError> {
        let t = self.apply(&Action::PlayTurn {
            player: player.into(),
            proof,
            next_target,
        })?;
        let outcome = t.shot_outcome();
        Ok((t.state, outcome))
    }

    pub fn reveal_board(
        &self,
        player: impl Into<PlayerId>,
        proofs: Vec<MerkleProof>,
    ) -> Result<Self, ArbiterError> {
        self.apply(&Action::RevealBoard {
            player: player.into(),
            proofs,
        })
        .map(|t| t.state)
    }

    pub fn tick(&self, ticks: u64) -> Result<Self, ArbiterError> {
        self.apply(&Action::Tick { ticks }).map(|t| t.state)
    }

    pub fn timeout_claim(&self, claimant: impl Into<PlayerId>) -> Result<Self, ArbiterError> {
        self.apply(&Action::TimeoutClaim {
            claimant: claimant.into(),
        })
        .map(|t| t.state)
    }

    /// Pays the whole pot to the winner. Calling again yields an empty ledger.
    pub fn settle(&self) -> Result<(Self, Ledger), ArbiterError> {
        let t = self.apply(&Action::Settle)?;
        let ledger = t
            .effects
            .iter()
            .filter_map(|e| match e {
                Effect::Transferred { transfer } => Some(transfer.clone()),
                _ => None,
            })
            .collect();
        Ok((t.state, ledger))
    }

    fn wrong_phase(&self, action: &'static str) -> ArbiterError {
        ArbiterError::WrongPhase {
            action,
            phase: self.phase.name(),
        }
    }

    fn refresh_deadline(&mut self) {
        self.deadline = Some(self.clock + self.config.move_window);
    }

    fn check_deadline(&self) -> Result<(), ArbiterError> {
        match self.deadline {
            Some(deadline) if self.clock >= deadline => Err(ArbiterError::DeadlinePassed {
                deadline,
                clock: self.clock,
            }),
            _ => Ok(()),
        }
    }

    fn seat(&self, player: &PlayerId) -> Result<usize, ArbiterError> {
        self.seat_of(player)
            .ok_or_else(|| ArbiterError::UnknownPlayer(player.clone()))
    }

    fn finish(&mut self, verdict: Verdict, effects: &mut Vec<Effect>) {
        self.deadline = None;
        effects.push(Effect::Finished {
            verdict: verdict.clone(),
        });
        self.phase = GamePhase::Finished { verdict };
    }

    fn do_register(
        &mut self,
        player: &PlayerId,
        deposit: Amount,
        effects: &mut Vec<Effect>,
    ) -> Result<(), ArbiterError> {
        if self.players.len() >= 2 {
            return Err(ArbiterError::GameFull);
        }
        if self.phase != GamePhase::Registration {
            return Err(self.wrong_phase("register"));
        }
        if self.seat_of(player).is_some() {
            return Err(ArbiterError::DuplicatePlayer(player.clone()));
        }
        if deposit == 0 {
            return Err(ArbiterError::ZeroDeposit);
        }
        if let Some(first) = self.players.first() {
            if first.deposit != deposit {
                return Err(ArbiterError::UnequalDeposit {
                    expected: first.deposit,
                    offered: deposit,
                });
            }
        }
        self.players.push(PlayerRecord {
            id: player.clone(),
            deposit,
            root: None,
            reveals: BTreeMap::new(),
        });
        self.pot += deposit;
        effects.push(Effect::Registered {
            player: player.clone(),
            deposit,
        });
        if self.players.len() == 2 {
            self.phase = GamePhase::Committing;
            self.refresh_deadline();
        }
        Ok(())
    }

    fn do_commit(
        &mut self,
        player: &PlayerId,
        root: Digest,
        effects: &mut Vec<Effect>,
    ) -> Result<(), ArbiterError> {
        if self.phase != GamePhase::Committing {
            return Err(self.wrong_phase("commit_root"));
        }
        let seat = self.seat(player)?;
        if self.players[seat].root.is_some() {
            return Err(ArbiterError::AlreadyCommitted(player.clone()));
        }
        // A late commit is only refused when the opponent has committed and can
        // therefore claim the timeout; otherwise nobody could ever move again.
        if self.players[1 - seat].root.is_some() {
            self.check_deadline()?;
        }
        self.players[seat].root = Some(root);
        effects.push(Effect::RootCommitted {
            player: player.clone(),
            root,
        });
        if self.players.iter().all(|p| p.root.is_some()) {
            self.phase = GamePhase::AwaitingFirstShot;
        }
        self.refresh_deadline();
        Ok(())
    }

    fn do_first_shot(
        &mut self,
        player: &PlayerId,
        target: Coordinate,
        effects: &mut Vec<Effect>,
    ) -> Result<(), ArbiterError> {
        if self.phase != GamePhase::AwaitingFirstShot {
            return Err(self.wrong_phase("first_shot"));
        }
        let seat = self.seat(player)?;
        if seat != 0 {
            return Err(ArbiterError::NotYourTurn(player.clone()));
        }
        self.check_deadline()?;
        self.config.geometry.index_of(target)?;
        self.shot_log.push(Shot {
            shooter: player.clone(),
            target,
            outcome: None,
        });
        effects.push(Effect::ShotFired {
            shooter: player.clone(),
            target,
        });
        self.phase = GamePhase::AwaitingTurn {
            player: self.players[1].id.clone(),
            pending_target: target,
        };
        self.refresh_deadline();
        Ok(())
    }

    fn do_play_turn(
        &mut self,
        hasher: &dyn NodeHasher,
        player: &PlayerId,
        proof: &MerkleProof,
        next_target: Coordinate,
        effects: &mut Vec<Effect>,
    ) -> Result<(), ArbiterError> {
        let GamePhase::AwaitingTurn {
            player: awaited,
            pending_target,
        } = &self.phase
        else {
            return Err(self.wrong_phase("play_turn"));
        };
        let pending_target = *pending_target;
        if awaited != player {
            self.seat(player)?;
            return Err(ArbiterError::NotYourTurn(player.clone()));
        }
        self.check_deadline()?;
        let seat = self.seat(player)?;
        let opponent = self.players[1 - seat].id.clone();
        let geometry = self.config.geometry;
        let pending_index = geometry.index_of(pending_target)?;
        let root = self.players[seat].root.expect("roots committed before play");

        if proof.cell_index() != pending_index || !verify_proof_in(geometry, hasher, &root, proof) {
            self.finish(Verdict::penalty(opponent, CheatReason::FakeProof), effects);
            return Ok(());
        }

        let value = proof.leaf.ship_size;
        let prior = self.players[seat].reveals.values().copied();
        let outcome = classify_reveal(&self.config.fleet, prior, value);

        if outcome.kind != ShotKind::FleetSunk {
            geometry.index_of(next_target)?;
            if self.targets_of(player).any(|t| t == next_target) {
                return Err(ArbiterError::RepeatedTarget(next_target));
            }
        }

        self.players[seat].reveals.insert(pending_index, value);
        if let Some(shot) = self.shot_log.last_mut() {
            debug_assert_eq!(shot.target, pending_target);
            shot.outcome = Some(outcome);
        }
        effects.push(Effect::CellRevealed {
            owner: player.clone(),
            target: pending_target,
            outcome,
        });

        if outcome.kind == ShotKind::FleetSunk {
            self.phase = GamePhase::AwaitingReveal { candidate: opponent };
        } else {
            self.shot_log.push(Shot {
                shooter: player.clone(),
                target: next_target,
                outcome: None,
            });
            effects.push(Effect::ShotFired {
                shooter: player.clone(),
                target: next_target,
            });
            self.phase = GamePhase::AwaitingTurn {
                player: opponent,
                pending_target: next_target,
            };
        }
        self.refresh_deadline();
        Ok(())
    }

    fn do_reveal(
        &mut self,
        hasher: &dyn NodeHasher,
        player: &PlayerId,
        proofs: &[MerkleProof],
        effects: &mut Vec<Effect>,
    ) -> Result<(), ArbiterError> {
        let GamePhase::AwaitingReveal { candidate } = &self.phase else {
            return Err(self.wrong_phase("reveal_board"));
        };
        if candidate != player {
            self.seat(player)?;
            return Err(ArbiterError::NotYourTurn(player.clone()));
        }
        self.check_deadline()?;
        let seat = self.seat(player)?;
        let opponent = self.players[1 - seat].id.clone();
        let geometry = self.config.geometry;
        let root = self.players[seat].root.expect("roots committed before reveal");

        let mut cells = self.players[seat].reveals.clone();
        for proof in proofs {
            let index = proof.cell_index();
            let consistent = cells.get(&index).is_none_or(|&v| v == proof.leaf.ship_size);
            if !consistent || !verify_proof_in(geometry, hasher, &root, proof) {
                self.finish(Verdict::penalty(opponent, CheatReason::FakeProof), effects);
                return Ok(());
            }
            cells.insert(index, proof.leaf.ship_size);
        }
        let missing = geometry.cell_count() - cells.len();
        if missing > 0 {
            return Err(ArbiterError::IncompleteReveal { missing });
        }

        let board: Vec<u8> = cells.values().copied().collect();
        self.players[seat].reveals = cells;
        effects.push(Effect::BoardRevealed {
            owner: player.clone(),
        });
        let verdict = if audit_revealed_board(geometry, &board, &self.config.fleet).is_valid() {
            Verdict::legitimate(player.clone())
        } else {
            Verdict::penalty(opponent, CheatReason::InappropriatePlacement)
        };
        self.finish(verdict, effects);
        Ok(())
    }

    fn do_timeout_claim(
        &mut self,
        claimant: &PlayerId,
        effects: &mut Vec<Effect>,
    ) -> Result<(), ArbiterError> {
        if matches!(self.phase, GamePhase::Finished { .. }) {
            return Err(self.wrong_phase("timeout_claim"));
        }
        self.seat(claimant)?;
        let awaited = self.awaited();
        if awaited.is_empty() {
            return Err(ArbiterError::NothingAwaited(self.phase.name()));
        }
        if awaited.contains(claimant) {
            return Err(ArbiterError::DelinquentClaimant(claimant.clone()));
        }
        let deadline = self.deadline.expect("awaited phases carry a deadline");
        if self.clock < deadline {
            return Err(ArbiterError::DeadlineNotReached {
                deadline,
                clock: self.clock,
            });
        }
        let verdict = match self.phase {
            GamePhase::AwaitingReveal { .. } => {
                Verdict::penalty(claimant.clone(), CheatReason::RefusedReveal)
            }
            _ => Verdict::forfeit(claimant.clone()),
        };
        self.finish(verdict, effects);
        Ok(())
    }

    fn do_settle(&mut self, effects: &mut Vec<Effect>) -> Result<(), ArbiterError> {
        let GamePhase::Finished { verdict } = &self.phase else {
            return Err(ArbiterError::NotFinished);
        };
        if self.pot > 0 {
            let transfer = Transfer {
                to: verdict.winner.clone(),
                amount: self.pot,
            };
            self.pot = 0;
            self.transfers.push(transfer.clone());
            effects.push(Effect::Transferred { transfer });
        }
        Ok(())
    }
}
