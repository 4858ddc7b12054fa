//! Fleet placement, shot resolution and the terminal fleet audit.
//!
//! Leaves only carry a ship's size, never its identity. When every size in
//! the fleet is distinct, "all cells of value `s` revealed" identifies the
//! sinking of the size-`s` ship exactly. Fleets with repeated sizes only get
//! hit/miss/fleet-sunk outcomes.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{BoardGeometry, Coordinate, CoordinateError, MAX_SHIP_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Along a row (increasing column).
    Horizontal,
    /// Down a column (increasing row).
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub size: u8,
    pub origin: Coordinate,
    pub orientation: Orientation,
}

impl Placement {
    pub fn new(size: u8, origin: Coordinate, orientation: Orientation) -> Self {
        Self {
            size,
            origin,
            orientation,
        }
    }

    /// Cell indices covered by this ship, or `None` if any falls off the board.
    pub fn cells(&self, geometry: BoardGeometry) -> Option<Vec<u8>> {
        (0..self.size)
            .map(|k| {
                let c = match self.orientation {
                    Orientation::Horizontal => {
                        Coordinate::new(self.origin.row, self.origin.col.checked_add(k)?)
                    }
                    Orientation::Vertical => {
                        Coordinate::new(self.origin.row.checked_add(k)?, self.origin.col)
                    }
                };
                geometry.index_of(c).ok()
            })
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FleetSpecError {
    #[error("fleet must contain at least one ship")]
    Empty,
    #[error("ship size {0} is outside 1..={MAX_SHIP_SIZE}")]
    SizeOutOfRange(u8),
}

/// Multiset of ship sizes every board must contain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct FleetSpec {
    sizes: Vec<u8>,
}

impl FleetSpec {
    pub fn new(mut sizes: Vec<u8>) -> Result<Self, FleetSpecError> {
        if sizes.is_empty() {
            return Err(FleetSpecError::Empty);
        }
        if let Some(&bad) = sizes.iter().find(|&&s| s == 0 || s > MAX_SHIP_SIZE) {
            return Err(FleetSpecError::SizeOutOfRange(bad));
        }
        sizes.sort_unstable();
        Ok(Self { sizes })
    }

    /// One ship each of sizes 1 through 5.
    pub fn standard() -> Self {
        Self {
            sizes: vec![1, 2, 3, 4, 5],
        }
    }

    /// A single two-cell ship, for the 2x2 board.
    pub fn miniature() -> Self {
        Self { sizes: vec![2] }
    }

    pub fn sizes(&self) -> &[u8] {
        &self.sizes
    }

    pub fn total_ship_cells(&self) -> usize {
        total_ship_cells(&self.sizes)
    }

    pub fn multiplicity(&self, size: u8) -> usize {
        self.sizes.iter().filter(|&&s| s == size).count()
    }

    /// Sinking is only announced for sizes that occur once in the fleet.
    fn announces_sinking(&self, size: u8) -> bool {
        self.multiplicity(size) == 1
    }
}

impl Default for FleetSpec {
    fn default() -> Self {
        Self::standard()
    }
}

impl TryFrom<Vec<u8>> for FleetSpec {
    type Error = FleetSpecError;

    fn try_from(sizes: Vec<u8>) -> Result<Self, Self::Error> {
        Self::new(sizes)
    }
}

impl From<FleetSpec> for Vec<u8> {
    fn from(spec: FleetSpec) -> Self {
        spec.sizes
    }
}

/// Sum of a fleet's ship sizes.
pub fn total_ship_cells(sizes: &[u8]) -> usize {
    sizes.iter().map(|&s| s as usize).sum()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("expected {expected} cells, got {actual}")]
    WrongCellCount { expected: usize, actual: usize },
    #[error("cell value {0} is out of range")]
    ValueOutOfRange(u8),
    #[error("layout text line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Cell-by-cell board contents: the size of the ship covering a cell, or 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoardLayout {
    geometry: BoardGeometry,
    cells: Vec<u8>,
}

impl BoardLayout {
    pub fn empty(geometry: BoardGeometry) -> Self {
        Self {
            geometry,
            cells: vec![0; geometry.cell_count()],
        }
    }

    /// Wraps raw cells. Only shape and value range are checked here; fleet
    /// validity is the audit's job.
    pub fn from_cells(geometry: BoardGeometry, cells: Vec<u8>) -> Result<Self, LayoutError> {
        if cells.len() != geometry.cell_count() {
            return Err(LayoutError::WrongCellCount {
                expected: geometry.cell_count(),
                actual: cells.len(),
            });
        }
        if let Some(&bad) = cells.iter().find(|&&v| v > MAX_SHIP_SIZE) {
            return Err(LayoutError::ValueOutOfRange(bad));
        }
        Ok(Self { geometry, cells })
    }

    pub fn geometry(&self) -> BoardGeometry {
        self.geometry
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<u8> {
        self.cells
    }

    pub fn value_at(&self, index: u8) -> u8 {
        self.cells[index as usize]
    }

    pub fn occupied(&self) -> impl Iterator<Item = u8> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| i as u8)
    }
}

/// One line per row, `.` for water, a digit for the covering ship's size
/// (`a` stands for 10).
impl fmt::Display for BoardLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.geometry.cols() as usize) {
            let line: String = row
                .iter()
                .map(|&v| match v {
                    0 => '.',
                    v => char::from_digit(v as u32, 11).unwrap_or('?'),
                })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for BoardLayout {
    type Err = LayoutError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let geometry = u8::try_from(rows.len())
            .ok()
            .zip(u8::try_from(width).ok())
            .and_then(|(r, c)| BoardGeometry::new(r, c))
            .ok_or_else(|| LayoutError::Parse {
                line: 1,
                reason: format!("unsupported board of {} rows x {width} columns", rows.len()),
            })?;
        let mut cells = Vec::with_capacity(geometry.cell_count());
        for (line, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(LayoutError::Parse {
                    line: line + 1,
                    reason: format!("expected {width} columns"),
                });
            }
            for ch in row.chars() {
                let v = match ch {
                    '.' => 0,
                    c => c
                        .to_digit(11)
                        .filter(|&d| d >= 1)
                        .ok_or_else(|| LayoutError::Parse {
                            line: line + 1,
                            reason: format!("unexpected character {c:?}"),
                        })? as u8,
                };
                cells.push(v);
            }
        }
        BoardLayout::from_cells(geometry, cells)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlacementError {
    #[error("placement {placement} has invalid size {size}")]
    InvalidSize { placement: usize, size: u8 },
    #[error("placement {placement} extends off the board")]
    OutOfBounds { placement: usize },
    #[error("placement {placement} overlaps placement {other} at cell {cell}")]
    Overlap {
        placement: usize,
        other: usize,
        cell: u8,
    },
    #[error("fleet sizes {found:?} do not match the required {expected:?}")]
    SizeMismatch { expected: Vec<u8>, found: Vec<u8> },
}

/// Checks placements against the board and fleet and returns the layout they
/// generate. Ships may touch but not overlap.
pub fn validate_fleet(
    geometry: BoardGeometry,
    placements: &[Placement],
    spec: &FleetSpec,
) -> Result<BoardLayout, PlacementError> {
    let mut owner: Vec<Option<usize>> = vec![None; geometry.cell_count()];
    let mut cells = vec![0u8; geometry.cell_count()];
    for (i, p) in placements.iter().enumerate() {
        if p.size == 0 || p.size > MAX_SHIP_SIZE {
            return Err(PlacementError::InvalidSize {
                placement: i,
                size: p.size,
            });
        }
        let covered = p
            .cells(geometry)
            .ok_or(PlacementError::OutOfBounds { placement: i })?;
        for cell in covered {
            if let Some(other) = owner[cell as usize] {
                return Err(PlacementError::Overlap {
                    placement: i,
                    other,
                    cell,
                });
            }
            owner[cell as usize] = Some(i);
            cells[cell as usize] = p.size;
        }
    }
    let mut found: Vec<u8> = placements.iter().map(|p| p.size).collect();
    found.sort_unstable();
    if found != spec.sizes() {
        return Err(PlacementError::SizeMismatch {
            expected: spec.sizes().to_vec(),
            found,
        });
    }
    Ok(BoardLayout { geometry, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotKind {
    Miss,
    Hit,
    Sunk,
    FleetSunk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShotOutcome {
    pub kind: ShotKind,
    pub ship_size: u8,
}

impl ShotOutcome {
    pub const MISS: ShotOutcome = ShotOutcome {
        kind: ShotKind::Miss,
        ship_size: 0,
    };

    pub fn is_hit(&self) -> bool {
        self.kind != ShotKind::Miss
    }
}

/// Outcome of newly revealing `value` on a board whose earlier reveals are
/// `prior`. Shared by the rules engine and the arbiter, which only ever sees
/// revealed values.
pub fn classify_reveal(spec: &FleetSpec, prior: impl IntoIterator<Item = u8>, value: u8) -> ShotOutcome {
    if value == 0 {
        return ShotOutcome::MISS;
    }
    let mut occupied = 1usize;
    let mut same_size = 1usize;
    for v in prior {
        if v != 0 {
            occupied += 1;
            if v == value {
                same_size += 1;
            }
        }
    }
    let kind = if occupied >= spec.total_ship_cells() {
        ShotKind::FleetSunk
    } else if spec.announces_sinking(value) && same_size == value as usize {
        ShotKind::Sunk
    } else {
        ShotKind::Hit
    };
    ShotOutcome {
        kind,
        ship_size: value,
    }
}

/// Resolves a shot at `target` given the cells already revealed as hits.
pub fn resolve_shot(
    layout: &BoardLayout,
    spec: &FleetSpec,
    revealed_hits: &BTreeSet<u8>,
    target: Coordinate,
) -> Result<ShotOutcome, CoordinateError> {
    let index = layout.geometry.index_of(target)?;
    let prior = revealed_hits
        .iter()
        .filter(|&&i| i != index && (i as usize) < layout.cells.len())
        .map(|&i| layout.value_at(i));
    Ok(classify_reveal(spec, prior, layout.value_at(index)))
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "failure", rename_all = "snake_case")]
pub enum AuditFailure {
    #[error("board has {actual} cells, expected {expected}")]
    WrongBoardSize { expected: usize, actual: usize },
    #[error("{found} cells carry size {size}, expected {expected}")]
    WrongCellCount { size: u8, expected: usize, found: usize },
    #[error("{count} cells carry size {value}, which is not in the fleet")]
    ExtraOccupiedCells { value: u8, count: usize },
    #[error("the size-{size} ship is in one line but not consecutive")]
    DisconnectedRun { size: u8 },
    #[error("the size-{size} cells do not form straight ships")]
    BentShip { size: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AuditVerdict {
    Valid,
    Invalid { reason: AuditFailure },
}

impl AuditVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, AuditVerdict::Valid)
    }
}

/// Recovers a placement set from fully revealed cells, if one exists.
pub fn reconstruct_placements(
    geometry: BoardGeometry,
    cells: &[u8],
    spec: &FleetSpec,
) -> Result<Vec<Placement>, AuditFailure> {
    if cells.len() != geometry.cell_count() {
        return Err(AuditFailure::WrongBoardSize {
            expected: geometry.cell_count(),
            actual: cells.len(),
        });
    }
    for value in 1..=MAX_SHIP_SIZE {
        let count = cells.iter().filter(|&&v| v == value).count();
        if count > 0 && spec.multiplicity(value) == 0 {
            return Err(AuditFailure::ExtraOccupiedCells { value, count });
        }
    }
    if let Some(&value) = cells.iter().find(|&&v| v > MAX_SHIP_SIZE) {
        return Err(AuditFailure::ExtraOccupiedCells {
            value,
            count: cells.iter().filter(|&&v| v == value).count(),
        });
    }

    let mut distinct: Vec<u8> = spec.sizes().to_vec();
    distinct.dedup();
    let mut placements = Vec::with_capacity(spec.sizes().len());
    for size in distinct {
        let ships = spec.multiplicity(size);
        let mut group: Vec<u8> = cells
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == size)
            .map(|(i, _)| i as u8)
            .collect();
        let expected = size as usize * ships;
        if group.len() != expected {
            return Err(AuditFailure::WrongCellCount {
                size,
                expected,
                found: group.len(),
            });
        }
        let before = placements.len();
        if !split_into_runs(geometry, size, &mut group, &mut placements) {
            placements.truncate(before);
            return Err(classify_bad_group(geometry, size, cells));
        }
    }
    Ok(placements)
}

/// Backtracking split of `group` (sorted ascending) into straight runs of
/// `size`. The smallest remaining cell must be the top/left end of a run.
fn split_into_runs(geometry: BoardGeometry, size: u8, group: &mut Vec<u8>, out: &mut Vec<Placement>) -> bool {
    let Some(&first) = group.first() else {
        return true;
    };
    let origin = geometry.coordinate_of(first as usize).expect("cell in range");
    let orientations: &[Orientation] = if size == 1 {
        &[Orientation::Horizontal]
    } else {
        &[Orientation::Horizontal, Orientation::Vertical]
    };
    for &orientation in orientations {
        let p = Placement::new(size, origin, orientation);
        let Some(run) = p.cells(geometry) else { continue };
        if !run.iter().all(|c| group.binary_search(c).is_ok()) {
            continue;
        }
        let saved = group.clone();
        group.retain(|c| !run.contains(c));
        out.push(p);
        if split_into_runs(geometry, size, group, out) {
            return true;
        }
        out.pop();
        *group = saved;
    }
    false
}

fn classify_bad_group(geometry: BoardGeometry, size: u8, cells: &[u8]) -> AuditFailure {
    let coords: Vec<Coordinate> = cells
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == size)
        .map(|(i, _)| geometry.coordinate_of(i).expect("cell in range"))
        .collect();
    let same_row = coords.windows(2).all(|w| w[0].row == w[1].row);
    let same_col = coords.windows(2).all(|w| w[0].col == w[1].col);
    if same_row || same_col {
        AuditFailure::DisconnectedRun { size }
    } else {
        AuditFailure::BentShip { size }
    }
}

/// Terminal audit of a fully revealed board: for each fleet size the cells
/// carrying that value must form the right number of straight consecutive
/// runs, and nothing else may be occupied.
pub fn audit_revealed_board(geometry: BoardGeometry, cells: &[u8], spec: &FleetSpec) -> AuditVerdict {
    match reconstruct_placements(geometry, cells, spec) {
        Ok(placements) => match validate_fleet(geometry, &placements, spec) {
            Ok(layout) if layout.cells() == cells => AuditVerdict::Valid,
            // Unreachable when reconstruction is sound; kept as a cross-check.
            _ => AuditVerdict::Invalid {
                reason: AuditFailure::BentShip {
                    size: placements.first().map_or(0, |p| p.size),
                },
            },
        },
        Err(reason) => AuditVerdict::Invalid { reason },
    }
}

/// The example board: size 3 at A1-C1, size 4 at D3-D6, size 5 at C8-G8,
/// size 2 at F2-F3 and size 1 at G5.
pub fn example_placements() -> Vec<Placement> {
    use Orientation::*;
    vec![
        Placement::new(3, Coordinate::new(0, 0), Vertical),
        Placement::new(4, Coordinate::new(3, 2), Horizontal),
        Placement::new(5, Coordinate::new(2, 7), Vertical),
        Placement::new(2, Coordinate::new(5, 1), Horizontal),
        Placement::new(1, Coordinate::new(6, 4), Horizontal),
    ]
}
