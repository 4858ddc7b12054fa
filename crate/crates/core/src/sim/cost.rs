use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::arbiter::{Action, ArbiterState};
use crate::merkle::{verify_proof_in, BoardTree, CountingHasher, DIGEST_LEN};
use crate::rules::validate_fleet;

use super::strategy::{HuntStrategy, Strategy};
use super::{wire_encoding, SimConfig, SimError, PLAYER_A, PLAYER_B};

/// Wire and verification cost of one protocol round, measured by pushing
/// real messages through an instrumented arbiter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundCost {
    /// Commit message size per player.
    pub root_bytes: usize,
    pub leaf_count: usize,
    pub tree_depth: usize,
    pub sibling_count: usize,
    pub sibling_bytes: usize,
    /// Leaf on the wire: ship size, blinding length and blinding factor.
    pub leaf_bytes: usize,
    /// Leaf as hashed: ship size and blinding factor.
    pub leaf_encoding_bytes: usize,
    pub index_bytes: usize,
    /// Canonical proof including the blinding length byte.
    pub proof_bytes: usize,
    /// Proof plus the next target.
    pub turn_bytes: usize,
    /// Hash invocations the arbiter spent on one turn.
    pub hashes_per_turn: u64,
    /// Proofs in a reveal of the whole board and the hashes spent checking them.
    pub full_reveal_proofs: usize,
    pub full_reveal_hashes: u64,
    /// The analytical bound 2·B·MTP with B leaves and MTP = depth + 1 hashes per path.
    pub full_reveal_bound: u64,
}

pub fn measure_round_cost(config: &SimConfig) -> Result<RoundCost, SimError> {
    config.validate()?;
    let geometry = config.arbiter.geometry;
    let spec = &config.arbiter.fleet;
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let mut tree_for = |seed| -> Result<BoardTree, SimError> {
        let placements = HuntStrategy::new(seed, geometry)
            .choose_placements(geometry, spec)
            .ok_or(SimError::Unplaceable)?;
        let layout = validate_fleet(geometry, &placements, spec).map_err(|_| SimError::Unplaceable)?;
        Ok(BoardTree::build_in(
            geometry,
            layout.cells(),
            config.blinding_len,
            &mut rng,
        )?)
    };
    let trees = [tree_for(1)?, tree_for(2)?];

    let hasher: CountingHasher = CountingHasher::default();
    let mut state = ArbiterState::new(config.arbiter.clone())?;
    let mut commit_bytes = Vec::new();
    for id in [PLAYER_A, PLAYER_B] {
        state = state.register(id, config.deposit)?;
    }
    for (id, tree) in [PLAYER_A, PLAYER_B].into_iter().zip(&trees) {
        let commit = Action::CommitRoot {
            player: id.into(),
            root: tree.root(),
        };
        commit_bytes.push(wire_encoding(geometry, &commit).1.len());
        state = state.apply(&commit)?.state;
    }
    debug_assert!(commit_bytes.iter().all(|&n| n == commit_bytes[0]));

    let first = geometry.coordinate_of(0).expect("board has a first cell");
    state = state.first_shot(PLAYER_A, first)?;
    let proof = trees[1].prove_cell(0)?;
    let turn = Action::PlayTurn {
        player: PLAYER_B.into(),
        proof: proof.clone(),
        next_target: first,
    };
    let turn_bytes = wire_encoding(geometry, &turn).1.len();
    hasher.reset();
    state.apply_with(&hasher, &turn)?;
    let hashes_per_turn = hasher.reset();

    let cells = geometry.cell_count();
    let root = trees[1].root();
    for i in 0..cells {
        let p = trees[1].prove_cell(i)?;
        if !verify_proof_in(geometry, &hasher, &root, &p) {
            return Err(SimError::Config("honest proof failed to verify".into()));
        }
    }
    let full_reveal_hashes = hasher.reset();

    let proof_bytes = proof.to_bytes().len();
    let sibling_bytes = proof.siblings.len() * DIGEST_LEN;
    let index_bytes = 1;
    let depth = geometry.depth();
    Ok(RoundCost {
        root_bytes: commit_bytes[0],
        leaf_count: geometry.leaf_count(),
        tree_depth: depth,
        sibling_count: proof.siblings.len(),
        sibling_bytes,
        leaf_bytes: proof_bytes - sibling_bytes - index_bytes,
        leaf_encoding_bytes: proof.leaf.encode()?.len(),
        index_bytes,
        proof_bytes,
        turn_bytes,
        hashes_per_turn,
        full_reveal_proofs: cells,
        full_reveal_hashes,
        full_reveal_bound: 2 * geometry.leaf_count() as u64 * (depth as u64 + 1),
    })
}
