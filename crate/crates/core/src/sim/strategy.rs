use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::board::{BoardGeometry, Coordinate};
use crate::rules::{validate_fleet, FleetSpec, Orientation, Placement, ShotOutcome};

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Decision procedure of a player. Implementations must be deterministic
/// for a given seed.
pub trait Strategy {
    /// A placement set for `spec`, or `None` if the fleet cannot be placed.
    fn choose_placements(&mut self, geometry: BoardGeometry, spec: &FleetSpec) -> Option<Vec<Placement>>;

    /// Next cell to fire at given this player's own shots so far (target,
    /// outcome once proven). `None` when every cell has been fired at.
    fn choose_target(&mut self, history: &[(u8, Option<ShotOutcome>)]) -> Option<u8>;
}

/// Random placements; fires in a seeded random order, but tries the
/// neighbours of earlier hits first.
#[derive(Debug, Clone)]
pub struct HuntStrategy {
    rng: ChaCha20Rng,
    order: Vec<u8>,
    geometry: BoardGeometry,
}

impl HuntStrategy {
    pub fn new(seed: u64, geometry: BoardGeometry) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut order: Vec<u8> = (0..geometry.cell_count() as u8).collect();
        order.shuffle(&mut rng);
        Self { rng, order, geometry }
    }
}

impl Strategy for HuntStrategy {
    fn choose_placements(&mut self, geometry: BoardGeometry, spec: &FleetSpec) -> Option<Vec<Placement>> {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let placements: Vec<Placement> = spec
                .sizes()
                .iter()
                .rev()
                .map(|&size| {
                    let orientation = if self.rng.gen_bool(0.5) {
                        Orientation::Horizontal
                    } else {
                        Orientation::Vertical
                    };
                    let origin = Coordinate::new(
                        self.rng.gen_range(0..geometry.rows()),
                        self.rng.gen_range(0..geometry.cols()),
                    );
                    Placement::new(size, origin, orientation)
                })
                .collect();
            if validate_fleet(geometry, &placements, spec).is_ok() {
                return Some(placements);
            }
        }
        None
    }

    fn choose_target(&mut self, history: &[(u8, Option<ShotOutcome>)]) -> Option<u8> {
        let cells = self.geometry.cell_count();
        let mut fired = vec![false; cells];
        for &(t, _) in history {
            if (t as usize) < cells {
                fired[t as usize] = true;
            }
        }
        let hunt = history
            .iter()
            .filter(|(_, o)| o.is_some_and(|o| o.is_hit()))
            .flat_map(|&(t, _)| self.geometry.neighbours(t))
            .find(|&n| !fired[n as usize]);
        hunt.or_else(|| self.order.iter().copied().find(|&c| !fired[c as usize]))
    }
}
