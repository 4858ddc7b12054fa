use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use battleship_core::sim::{run_match_detailed, wire_encoding, WirePhase};
use battleship_core::{
    verify_proof, Action, ArbiterConfig, ArbiterState, BoardGeometry, BoardTree, Coordinate, GamePhase,
    MerkleProof, PlayerId,
};

fn arb_cells() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=5, 100)
}

fn tree(cells: &[u8], seed: u64) -> BoardTree {
    BoardTree::build(cells, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_cell_proves_and_verifies(cells in arb_cells(), seed in any::<u64>(), cell in 0usize..100) {
        let t = tree(&cells, seed);
        let proof = t.prove_cell(cell).unwrap();
        prop_assert!(verify_proof(&t.root(), &proof));
        prop_assert_eq!(proof.siblings.len(), 7);
        prop_assert_eq!(t.leaves().len(), 128);
        prop_assert_eq!(proof.leaf.ship_size, cells[cell]);
    }

    #[test]
    fn same_layout_and_seed_give_identical_bytes(cells in arb_cells(), seed in any::<u64>(), cell in 0usize..100) {
        let (a, b) = (tree(&cells, seed), tree(&cells, seed));
        prop_assert_eq!(a.root(), b.root());
        prop_assert_eq!(a.prove_cell(cell).unwrap().to_bytes(), b.prove_cell(cell).unwrap().to_bytes());
    }

    #[test]
    fn any_single_bit_flip_breaks_the_proof(
        cells in arb_cells(),
        seed in any::<u64>(),
        cell in 0usize..100,
        bit in 0usize..243 * 8,
    ) {
        let t = tree(&cells, seed);
        let mut bytes = t.prove_cell(cell).unwrap().to_bytes();
        prop_assert_eq!(bytes.len(), 243);
        bytes[bit / 8] ^= 1 << (bit % 8);
        if let Ok(mutated) = MerkleProof::from_bytes(&bytes) {
            prop_assert!(!verify_proof(&t.root(), &mutated));
        }
    }

    #[test]
    fn proof_carries_no_other_leaf(cells in arb_cells(), seed in any::<u64>(), cell in 0usize..100) {
        let t = tree(&cells, seed);
        let bytes = t.prove_cell(cell).unwrap().to_bytes();
        for (j, leaf) in t.leaves().iter().enumerate().take(100) {
            if j == cell {
                continue;
            }
            let r = leaf.blinding.as_ref().unwrap().as_bytes();
            prop_assert!(!bytes.windows(r.len()).any(|w| w == r), "blinding of cell {} inside proof of {}", j, cell);
        }
    }

    #[test]
    fn a_proof_cannot_open_two_different_boards(
        cells in arb_cells(),
        seeds in (any::<u64>(), any::<u64>()),
        cell in 0usize..100,
        delta in 1u8..=5,
    ) {
        let mut other = cells.clone();
        other[cell] = (other[cell] + delta) % 6;
        let (a, b) = (tree(&cells, seeds.0), tree(&other, seeds.1));
        let pa = a.prove_cell(cell).unwrap();
        let pb = b.prove_cell(cell).unwrap();
        prop_assert!(!(verify_proof(&a.root(), &pa) && verify_proof(&b.root(), &pa)));
        prop_assert!(!(verify_proof(&a.root(), &pb) && verify_proof(&b.root(), &pb)));
    }
}

fn scripts() -> impl Strategy<Value = battleship_core::AdversaryScript> {
    use battleship_core::AdversaryScript::*;
    prop_oneof![
        Just(Honest),
        Just(LocationChanger),
        Just(battleship_core::AdversaryScript::bad_fleet()),
        (0u32..20).prop_map(|k| Unresponsive { after_turns: k }),
        Just(FakeProof),
    ]
}

fn check_run_invariants(
    states: &[ArbiterState],
    trees: &std::collections::BTreeMap<PlayerId, BoardTree>,
) -> Result<(), TestCaseError> {
    for pair in states.windows(2) {
        for (before, after) in pair[0].players.iter().zip(&pair[1].players) {
            if before.root.is_some() {
                prop_assert_eq!(before.root, after.root, "root of {} changed", before.id);
            }
        }
    }
    for s in states {
        prop_assert!(s.is_conserved());
        for p in &s.players {
            let cells = trees[&p.id].cells();
            for (&cell, &value) in &p.reveals {
                prop_assert_eq!(
                    cells[cell as usize],
                    value,
                    "reveal of {} cell {} not from the committed tree",
                    p.id,
                    cell
                );
            }
        }
    }
    let last = states.last().unwrap();
    let shooters: Vec<&PlayerId> = last.shot_log.iter().map(|s| &s.shooter).collect();
    prop_assert!(
        shooters.windows(2).all(|w| w[0] != w[1]),
        "shooters do not alternate"
    );
    let mut seen = BTreeSet::new();
    for s in &last.shot_log {
        prop_assert!(seen.insert((s.shooter.clone(), s.target)), "repeated target");
    }
    let verdict = last.phase.verdict().expect("runs end finished");
    prop_assert_eq!(last.pot, 0);
    prop_assert_eq!(last.transfers.len(), 1);
    prop_assert_eq!(&last.transfers[0].to, &verdict.winner);
    prop_assert_eq!(last.transfers[0].amount, last.total_deposits());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulated_matches_keep_the_arbiter_invariants(a in scripts(), b in scripts(), seed in any::<u64>()) {
        let run = run_match_detailed(a, b, seed, &Default::default()).unwrap();
        check_run_invariants(&run.states, &run.trees)?;

        // Replaying the accepted actions from scratch lands on the same states.
        let mut state = run.states[0].clone();
        for (action, expected) in run.actions.iter().zip(&run.states[1..]) {
            state = state.apply(action).unwrap().state;
            prop_assert_eq!(&state, expected);
        }

        // Every turn costs the same number of bytes.
        let g = run.report.config.arbiter.geometry;
        let turns: BTreeSet<usize> = run
            .actions
            .iter()
            .filter(|a| matches!(a, Action::PlayTurn { .. }))
            .map(|a| wire_encoding(g, a))
            .filter(|(phase, _)| *phase == WirePhase::Shooting)
            .map(|(_, bytes)| bytes.len())
            .collect();
        prop_assert!(turns.len() <= 1, "turn sizes {:?}", turns);
    }
}

/// Two miniature boards and every proof they can produce, plus a forged one.
struct Pool {
    trees: [BoardTree; 2],
    proofs: Vec<MerkleProof>,
}

fn pool() -> Pool {
    let g = BoardGeometry::MINIATURE;
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let trees = [
        BoardTree::build_in(g, &[2, 2, 0, 0], 16, &mut rng).unwrap(),
        BoardTree::build_in(g, &[0, 2, 0, 2], 16, &mut rng).unwrap(),
    ];
    let mut proofs: Vec<MerkleProof> = trees
        .iter()
        .flat_map(|t| (0..4).map(|i| t.prove_cell(i).unwrap()))
        .collect();
    let mut forged = proofs[0].clone();
    forged.leaf.ship_size = 0;
    proofs.push(forged);
    Pool { trees, proofs }
}

fn arb_action(pool_size: usize) -> impl Strategy<Value = Action> {
    let player = prop_oneof![Just("A"), Just("B"), Just("C")].prop_map(PlayerId::new);
    let coord = (0u8..3, 0u8..3).prop_map(|(row, col)| Coordinate { row, col });
    prop_oneof![
        (player.clone(), prop_oneof![Just(100u64), Just(50), Just(0)])
            .prop_map(|(player, deposit)| Action::Register { player, deposit }),
        (player.clone(), 0usize..2).prop_map(|(player, t)| Action::CommitRoot {
            player,
            root: battleship_core::Digest([t as u8; 32])
        }),
        (player.clone(), coord.clone()).prop_map(|(player, target)| Action::FirstShot { player, target }),
        (player.clone(), 0..pool_size, coord).prop_map(|(player, i, next_target)| Action::PlayTurn {
            player,
            proof: pool().proofs[i].clone(),
            next_target
        }),
        (player.clone(), prop::collection::vec(0..pool_size, 0..5)).prop_map(|(player, idx)| {
            let p = pool();
            Action::RevealBoard {
                player,
                proofs: idx.into_iter().map(|i| p.proofs[i].clone()).collect(),
            }
        }),
        (0u64..6).prop_map(|ticks| Action::Tick { ticks }),
        player.prop_map(|claimant| Action::TimeoutClaim { claimant }),
        Just(Action::Settle),
    ]
}

/// Either an arbitrary action or a move that fits the current phase, with
/// a coin deciding whether its proofs are honest.
#[derive(Debug, Clone)]
enum Step {
    Random(Action),
    Plausible {
        honest: bool,
        target: Coordinate,
        forged: usize,
    },
}

fn arb_step() -> impl Strategy<Value = Step> {
    prop_oneof![
        1 => arb_action(9).prop_map(Step::Random),
        3 => (prop::bool::weighted(0.9), (0u8..2, 0u8..2), 0usize..9).prop_map(|(honest, (row, col), forged)| {
            Step::Plausible { honest, target: Coordinate { row, col }, forged }
        }),
    ]
}

/// Seat `i` commits to `pool.trees[i]`.
fn resolve(step: Step, pool: &Pool, state: &ArbiterState) -> Action {
    let g = BoardGeometry::MINIATURE;
    let (honest, target, forged) = match step {
        Step::Random(Action::CommitRoot { player, root }) => {
            return Action::CommitRoot {
                player,
                root: pool.trees[root.0[0] as usize].root(),
            }
        }
        Step::Random(action) => return action,
        Step::Plausible {
            honest,
            target,
            forged,
        } => (honest, target, forged),
    };
    let seat = |p: &PlayerId| state.seat_of(p).unwrap_or(0);
    match &state.phase {
        GamePhase::Registration => Action::Register {
            player: PlayerId::new(["A", "B"][state.players.len().min(1)]),
            deposit: 100,
        },
        GamePhase::Committing => {
            let seat = state.players.iter().position(|p| p.root.is_none()).unwrap_or(0);
            Action::CommitRoot {
                player: state.players[seat].id.clone(),
                root: pool.trees[seat].root(),
            }
        }
        GamePhase::AwaitingFirstShot => Action::FirstShot {
            player: state.players[0].id.clone(),
            target,
        },
        GamePhase::AwaitingTurn {
            player,
            pending_target,
        } => Action::PlayTurn {
            player: player.clone(),
            proof: if honest {
                pool.trees[seat(player)]
                    .prove_cell(g.index_of(*pending_target).unwrap() as usize)
                    .unwrap()
            } else {
                pool.proofs[forged].clone()
            },
            next_target: target,
        },
        GamePhase::AwaitingReveal { candidate } => {
            let mut proofs: Vec<MerkleProof> = (0..4)
                .map(|i| pool.trees[seat(candidate)].prove_cell(i).unwrap())
                .collect();
            if !honest {
                proofs[forged % 4] = pool.proofs[forged].clone();
            }
            Action::RevealBoard {
                player: candidate.clone(),
                proofs,
            }
        }
        GamePhase::Finished { .. } => Action::Settle,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn arbitrary_action_sequences_never_break_conservation(steps in prop::collection::vec(arb_step(), 1..60)) {
        let pool = pool();
        let mut state = ArbiterState::new(ArbiterConfig::miniature(3)).unwrap();
        for step in steps {
            let action = resolve(step, &pool, &state);
            match state.apply(&action) {
                Ok(t) => {
                    for (before, after) in state.players.iter().zip(&t.state.players) {
                        if before.root.is_some() {
                            prop_assert_eq!(before.root, after.root);
                        }
                    }
                    prop_assert!(t.state.clock >= state.clock);
                    prop_assert!(t.state.is_conserved());
                    if state.phase.is_finished() {
                        prop_assert_eq!(&t.state.phase, &state.phase, "verdict changed after finishing");
                    }
                    state = t.state;
                }
                Err(_) => prop_assert!(state.is_conserved()),
            }
            if let Some(v) = state.phase.verdict() {
                let paid: u64 = state.transfers.iter().map(|t| t.amount).sum();
                prop_assert!(state.transfers.iter().all(|t| t.to == v.winner));
                prop_assert!(paid == 0 || paid == state.total_deposits());
            }
        }
    }
}
