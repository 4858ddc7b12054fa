//! Shared inputs for the benches.

use battleship_core::{rules::example_placements, validate_fleet, BoardGeometry, FleetSpec};

/// Cell values of the example fleet layout on the standard board.
pub fn example_board() -> Vec<u8> {
    validate_fleet(
        BoardGeometry::STANDARD,
        &example_placements(),
        &FleetSpec::standard(),
    )
    .expect("example layout is valid")
    .into_cells()
}
