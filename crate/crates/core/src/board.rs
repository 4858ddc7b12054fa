//! Board geometry and cell addressing.
//!
//! Cells are numbered row-major: row `A` holds indices `0..cols`, the next
//! row continues from there. On the standard 10x10 board `A1` is 0 and `J10`
//! is 99. The commitment tree pads the cell count up to the next power of two.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest ship size (and therefore cell value) the engine accepts.
pub const MAX_SHIP_SIZE: u8 = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoordinateError {
    #[error("coordinate ({row}, {col}) is outside a {rows}x{cols} board")]
    OutOfBounds { row: u8, col: u8, rows: u8, cols: u8 },
    #[error("cell index {index} is outside a board of {cells} cells")]
    IndexOutOfBounds { index: usize, cells: usize },
    #[error("cannot parse coordinate {0:?}")]
    Parse(String),
}

/// Board dimensions. Both sides are at most 16 so that every cell index
/// fits in one byte on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoardGeometry {
    rows: u8,
    cols: u8,
}

impl BoardGeometry {
    pub const STANDARD: BoardGeometry = BoardGeometry { rows: 10, cols: 10 };
    /// The 2x2 board with a single two-cell ship used for exhaustive checks.
    pub const MINIATURE: BoardGeometry = BoardGeometry { rows: 2, cols: 2 };

    pub fn new(rows: u8, cols: u8) -> Option<Self> {
        if rows == 0 || cols == 0 || rows > 16 || cols > 16 {
            return None;
        }
        Some(Self { rows, cols })
    }

    pub fn rows(&self) -> u8 {
        self.rows
    }

    pub fn cols(&self) -> u8 {
        self.cols
    }

    pub fn cell_count(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    /// Number of leaves in the commitment tree (cells padded to a power of two).
    pub fn leaf_count(&self) -> usize {
        self.cell_count().next_power_of_two()
    }

    /// Tree depth, which is also the number of siblings in every proof.
    pub fn depth(&self) -> usize {
        self.leaf_count().trailing_zeros() as usize
    }

    pub fn contains(&self, coord: Coordinate) -> bool {
        coord.row < self.rows && coord.col < self.cols
    }

    pub fn index_of(&self, coord: Coordinate) -> Result<u8, CoordinateError> {
        if !self.contains(coord) {
            return Err(CoordinateError::OutOfBounds {
                row: coord.row,
                col: coord.col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(coord.row * self.cols + coord.col)
    }

    pub fn coordinate_of(&self, index: usize) -> Result<Coordinate, CoordinateError> {
        if index >= self.cell_count() {
            return Err(CoordinateError::IndexOutOfBounds {
                index,
                cells: self.cell_count(),
            });
        }
        Ok(Coordinate {
            row: (index / self.cols as usize) as u8,
            col: (index % self.cols as usize) as u8,
        })
    }

    /// Orthogonal neighbours of a cell, in bounds only.
    pub fn neighbours(&self, index: u8) -> Vec<u8> {
        let Ok(c) = self.coordinate_of(index as usize) else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(4);
        if c.row > 0 {
            out.push(index - self.cols);
        }
        if c.row + 1 < self.rows {
            out.push(index + self.cols);
        }
        if c.col > 0 {
            out.push(index - 1);
        }
        if c.col + 1 < self.cols {
            out.push(index + 1);
        }
        out
    }
}

impl Default for BoardGeometry {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// A cell position. Rows are lettered from `A`, columns numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coordinate {
    pub row: u8,
    pub col: u8,
}

impl Coordinate {
    pub const fn new(row: u8, col: u8) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", (b'A' + self.row) as char, self.col as u32 + 1)
    }
}

impl FromStr for Coordinate {
    type Err = CoordinateError;

    /// Parses labels such as `E5` or `J10`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CoordinateError::Parse(s.to_string());
        let mut chars = s.trim().chars();
        let letter = chars.next().ok_or_else(err)?.to_ascii_uppercase();
        if !letter.is_ascii_uppercase() {
            return Err(err());
        }
        let col: u8 = chars.as_str().parse().map_err(|_| err())?;
        if col == 0 {
            return Err(err());
        }
        Ok(Coordinate {
            row: letter as u8 - b'A',
            col: col - 1,
        })
    }
}
