//! Blinded Merkle commitments over a board.
//!
//! Every cell becomes a leaf `size || r` where `r` is a fresh blinding factor,
//! so the root reveals nothing about the layout. Cells are laid out row-major
//! and the leaf row is padded to a power of two with unblinded `0x00` leaves.
//!
//! Leaf and internal hashes are domain separated:
//! `leaf = H(0x00 || size || r)` and `node = H(0x01 || left || right)`.
//! Sibling orientation in a proof comes from the bits of the cell index,
//! least significant bit first (deepest level first).

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use base64::Engine as _;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::board::{BoardGeometry, MAX_SHIP_SIZE};

pub const DIGEST_LEN: usize = 32;
/// Default blinding length in bytes (128 bits), also the minimum accepted.
pub const BLINDING_LEN: usize = 16;

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MerkleError {
    #[error("ship size {0} is out of range (0..={MAX_SHIP_SIZE})")]
    ShipSizeOutOfRange(u8),
    #[error("blinding factor is {0} bytes, at least {BLINDING_LEN} required")]
    BlindingTooShort(usize),
    #[error("blinding factor is {0} bytes, at most 255 fit the wire format")]
    BlindingTooLong(usize),
    #[error("expected {expected} cells, got {actual}")]
    WrongCellCount { expected: usize, actual: usize },
    #[error("expected {expected} leaves, got {actual}")]
    WrongLeafCount { expected: usize, actual: usize },
    #[error("leaf at position {position} is inconsistent: {reason}")]
    InvalidLeaf { position: usize, reason: &'static str },
    #[error("cell index {index} is out of range for {cells} cells")]
    IndexOutOfRange { index: usize, cells: usize },
    #[error("malformed proof encoding: {0}")]
    MalformedProof(&'static str),
}

/// A 32-byte hash output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; DIGEST_LEN];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Hash primitive used for leaves and internal nodes.
pub trait NodeHasher: Send + Sync {
    fn leaf_digest(&self, leaf_bytes: &[u8]) -> Digest;
    fn node_digest(&self, left: &Digest, right: &Digest) -> Digest;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sha256Hasher;

impl NodeHasher for Sha256Hasher {
    fn leaf_digest(&self, leaf_bytes: &[u8]) -> Digest {
        let mut h = Sha256::new();
        h.update([LEAF_PREFIX]);
        h.update(leaf_bytes);
        Digest(h.finalize().into())
    }

    fn node_digest(&self, left: &Digest, right: &Digest) -> Digest {
        let mut h = Sha256::new();
        h.update([NODE_PREFIX]);
        h.update(left.0);
        h.update(right.0);
        Digest(h.finalize().into())
    }
}

/// Wraps a hasher and counts every invocation.
#[derive(Debug, Default)]
pub struct CountingHasher<H = Sha256Hasher> {
    inner: H,
    calls: AtomicU64,
}

impl<H: NodeHasher> CountingHasher<H> {
    pub fn new(inner: H) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) -> u64 {
        self.calls.swap(0, Ordering::Relaxed)
    }
}

impl<H: NodeHasher> NodeHasher for CountingHasher<H> {
    fn leaf_digest(&self, leaf_bytes: &[u8]) -> Digest {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.leaf_digest(leaf_bytes)
    }

    fn node_digest(&self, left: &Digest, right: &Digest) -> Digest {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.node_digest(left, right)
    }
}

/// Per-cell randomness `r`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BlindingFactor(Vec<u8>);

impl BlindingFactor {
    pub fn new(bytes: Vec<u8>) -> Result<Self, MerkleError> {
        if bytes.len() < BLINDING_LEN {
            return Err(MerkleError::BlindingTooShort(bytes.len()));
        }
        if bytes.len() > u8::MAX as usize {
            return Err(MerkleError::BlindingTooLong(bytes.len()));
        }
        Ok(Self(bytes))
    }

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R, len: usize) -> Result<Self, MerkleError> {
        let mut bytes = vec![0u8; len];
        rng.fill_bytes(&mut bytes);
        Self::new(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for BlindingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlindingFactor({} bytes)", self.0.len())
    }
}

/// Serializes a leaf as the ship-size byte followed by the blinding bytes.
/// Padding leaves carry no blinding and encode as a single `0x00`.
pub fn encode_leaf(ship_size: u8, blinding: Option<&BlindingFactor>) -> Result<Vec<u8>, MerkleError> {
    if ship_size > MAX_SHIP_SIZE {
        return Err(MerkleError::ShipSizeOutOfRange(ship_size));
    }
    match blinding {
        Some(r) => {
            if r.0.len() < BLINDING_LEN {
                return Err(MerkleError::BlindingTooShort(r.0.len()));
            }
            let mut out = Vec::with_capacity(1 + r.0.len());
            out.push(ship_size);
            out.extend_from_slice(&r.0);
            Ok(out)
        }
        None if ship_size == 0 => Ok(vec![0]),
        None => Err(MerkleError::InvalidLeaf {
            position: 0,
            reason: "unblinded leaf must be empty",
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafData {
    pub cell_index: u8,
    pub ship_size: u8,
    /// Present for board cells, absent for padding leaves.
    pub blinding: Option<BlindingFactor>,
}

impl LeafData {
    pub fn padding(cell_index: u8) -> Self {
        Self {
            cell_index,
            ship_size: 0,
            blinding: None,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, MerkleError> {
        encode_leaf(self.ship_size, self.blinding.as_ref())
    }
}

/// Complete tree over one board. Holds the blinding factors, so it stays
/// with the board owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoardTree {
    geometry: BoardGeometry,
    leaves: Vec<LeafData>,
    /// `levels[0]` are the leaf digests, the last level holds only the root.
    levels: Vec<Vec<Digest>>,
}

impl BoardTree {
    /// Builds the standard 10x10 tree with 16-byte blinding factors.
    pub fn build<R: RngCore + CryptoRng>(cells: &[u8], rng: &mut R) -> Result<Self, MerkleError> {
        Self::build_in(BoardGeometry::STANDARD, cells, BLINDING_LEN, rng)
    }

    pub fn build_in<R: RngCore + CryptoRng>(
        geometry: BoardGeometry,
        cells: &[u8],
        blinding_len: usize,
        rng: &mut R,
    ) -> Result<Self, MerkleError> {
        if cells.len() != geometry.cell_count() {
            return Err(MerkleError::WrongCellCount {
                expected: geometry.cell_count(),
                actual: cells.len(),
            });
        }
        if let Some(&bad) = cells.iter().find(|&&v| v > MAX_SHIP_SIZE) {
            return Err(MerkleError::ShipSizeOutOfRange(bad));
        }
        let mut leaves = Vec::with_capacity(geometry.leaf_count());
        for (i, &size) in cells.iter().enumerate() {
            leaves.push(LeafData {
                cell_index: i as u8,
                ship_size: size,
                blinding: Some(BlindingFactor::random(rng, blinding_len)?),
            });
        }
        for i in cells.len()..geometry.leaf_count() {
            leaves.push(LeafData::padding(i as u8));
        }
        Self::from_leaves(geometry, leaves, &Sha256Hasher)
    }

    /// Builds a tree from explicit leaves, e.g. to reuse a blinding assignment.
    pub fn from_leaves(
        geometry: BoardGeometry,
        leaves: Vec<LeafData>,
        hasher: &dyn NodeHasher,
    ) -> Result<Self, MerkleError> {
        if leaves.len() != geometry.leaf_count() {
            return Err(MerkleError::WrongLeafCount {
                expected: geometry.leaf_count(),
                actual: leaves.len(),
            });
        }
        let cells = geometry.cell_count();
        let mut bottom = Vec::with_capacity(leaves.len());
        for (position, leaf) in leaves.iter().enumerate() {
            if leaf.cell_index as usize != position {
                return Err(MerkleError::InvalidLeaf {
                    position,
                    reason: "cell index does not match position",
                });
            }
            if (position < cells) != leaf.blinding.is_some() {
                return Err(MerkleError::InvalidLeaf {
                    position,
                    reason: "blinding must be present exactly for board cells",
                });
            }
            let bytes = leaf.encode().map_err(|_| MerkleError::InvalidLeaf {
                position,
                reason: "leaf does not encode",
            })?;
            bottom.push(hasher.leaf_digest(&bytes));
        }

        let mut levels = vec![bottom];
        while levels.last().map_or(0, Vec::len) > 1 {
            let below = levels.last().expect("at least one level");
            let next = below
                .chunks_exact(2)
                .map(|pair| hasher.node_digest(&pair[0], &pair[1]))
                .collect();
            levels.push(next);
        }
        Ok(Self {
            geometry,
            leaves,
            levels,
        })
    }

    pub fn geometry(&self) -> BoardGeometry {
        self.geometry
    }

    pub fn root(&self) -> Digest {
        self.levels.last().expect("tree has a root level")[0]
    }

    pub fn leaves(&self) -> &[LeafData] {
        &self.leaves
    }

    pub fn levels(&self) -> &[Vec<Digest>] {
        &self.levels
    }

    /// Cell values of the committed board, without padding.
    pub fn cells(&self) -> Vec<u8> {
        self.leaves[..self.geometry.cell_count()]
            .iter()
            .map(|l| l.ship_size)
            .collect()
    }

    pub fn prove_cell(&self, cell_index: usize) -> Result<MerkleProof, MerkleError> {
        let cells = self.geometry.cell_count();
        if cell_index >= cells {
            return Err(MerkleError::IndexOutOfRange {
                index: cell_index,
                cells,
            });
        }
        let mut siblings = Vec::with_capacity(self.geometry.depth());
        let mut position = cell_index;
        for level in &self.levels[..self.levels.len() - 1] {
            siblings.push(level[position ^ 1]);
            position >>= 1;
        }
        Ok(MerkleProof {
            leaf: self.leaves[cell_index].clone(),
            siblings,
        })
    }
}

/// Authentication path for a single cell: the opened leaf plus one sibling
/// digest per level, ordered leaf to root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleProof {
    pub leaf: LeafData,
    pub siblings: Vec<Digest>,
}

impl MerkleProof {
    pub fn cell_index(&self) -> u8 {
        self.leaf.cell_index
    }

    /// Canonical wire form: `index || size || len(r) || r || siblings`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let blinding = self.leaf.blinding.as_ref().map_or(&[][..], |r| r.as_bytes());
        let mut out = Vec::with_capacity(3 + blinding.len() + DIGEST_LEN * self.siblings.len());
        out.push(self.leaf.cell_index);
        out.push(self.leaf.ship_size);
        out.push(blinding.len() as u8);
        out.extend_from_slice(blinding);
        for s in &self.siblings {
            out.extend_from_slice(&s.0);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MerkleError> {
        let [cell_index, ship_size, blinding_len, rest @ ..] = bytes else {
            return Err(MerkleError::MalformedProof("truncated header"));
        };
        let blinding_len = *blinding_len as usize;
        if rest.len() < blinding_len {
            return Err(MerkleError::MalformedProof("truncated blinding"));
        }
        let (blinding, siblings) = rest.split_at(blinding_len);
        if siblings.len() % DIGEST_LEN != 0 {
            return Err(MerkleError::MalformedProof("sibling bytes not a multiple of 32"));
        }
        let blinding = match blinding_len {
            0 => None,
            _ => Some(
                BlindingFactor::new(blinding.to_vec())
                    .map_err(|_| MerkleError::MalformedProof("blinding too short"))?,
            ),
        };
        let siblings = siblings
            .chunks_exact(DIGEST_LEN)
            .map(|c| Digest(c.try_into().expect("chunk is 32 bytes")))
            .collect();
        Ok(Self {
            leaf: LeafData {
                cell_index: *cell_index,
                ship_size: *ship_size,
                blinding,
            },
            siblings,
        })
    }

    pub fn to_base64(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(self.to_bytes())
    }

    pub fn from_base64(s: &str) -> Result<Self, MerkleError> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(|_| MerkleError::MalformedProof("invalid base64"))?;
        Self::from_bytes(&bytes)
    }
}

impl Serialize for MerkleProof {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_base64())
    }
}

impl<'de> Deserialize<'de> for MerkleProof {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        MerkleProof::from_base64(&s).map_err(serde::de::Error::custom)
    }
}

/// Checks a proof against a root on the standard board with SHA-256.
pub fn verify_proof(root: &Digest, proof: &MerkleProof) -> bool {
    verify_proof_in(BoardGeometry::STANDARD, &Sha256Hasher, root, proof)
}

/// Folds the leaf digest up through the siblings and compares with `root`.
/// Anything malformed (wrong depth, padding index, missing blinding) fails.
pub fn verify_proof_in(
    geometry: BoardGeometry,
    hasher: &dyn NodeHasher,
    root: &Digest,
    proof: &MerkleProof,
) -> bool {
    if proof.siblings.len() != geometry.depth() {
        return false;
    }
    if proof.leaf.cell_index as usize >= geometry.cell_count() || proof.leaf.blinding.is_none() {
        return false;
    }
    let Ok(bytes) = proof.leaf.encode() else {
        return false;
    };
    let mut acc = hasher.leaf_digest(&bytes);
    let mut position = proof.leaf.cell_index as usize;
    for sibling in &proof.siblings {
        acc = if position & 1 == 0 {
            hasher.node_digest(&acc, sibling)
        } else {
            hasher.node_digest(sibling, &acc)
        };
        position >>= 1;
    }
    acc == *root
}
