//! Discrete-time traffic environments.
//!
//! One intersection carries two unidirectional flows (avenue west-east,
//! cross street north-south). The grid carries an `avenues x cross_streets`
//! lattice with bidirectional flows in both axes. Time advances in slots:
//! departures are computed under the current light, queues update by
//! `x + arrivals - departures`, the light advances by the chosen bit, and
//! the reward is the negative sum of squared post-step queue lengths.

mod grid;
mod single;
mod trajectory;

pub use grid::{step_grid, GridEnv, GridState, GridStepResult};
pub use single::{departures_single, step_single, SingleEnv, SingleState, SingleStepResult};
pub use trajectory::{Snapshot, Trajectory};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action has {got} bits, expected {expected}")]
    ActionLengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Traffic light configuration, cycling green -> yellow -> red -> orange.
///
/// Green (0) passes the avenue flows, red (2) passes the cross flows; the
/// transitional yellow (1) and orange (3) pass nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LightPhase(u8);

impl LightPhase {
    pub const GREEN: LightPhase = LightPhase(0);
    pub const YELLOW: LightPhase = LightPhase(1);
    pub const RED: LightPhase = LightPhase(2);
    pub const ORANGE: LightPhase = LightPhase(3);
    pub const COUNT: usize = 4;

    pub fn new(value: u8) -> Result<Self, EnvError> {
        if value < 4 {
            Ok(LightPhase(value))
        } else {
            Err(EnvError::InvalidParameter(format!(
                "light phase {value} out of range"
            )))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// The only legal transitions: stay, or advance one step around the
    /// cycle.
    pub fn advanced(self, bit: u8) -> LightPhase {
        debug_assert!(bit <= 1, "action bit must be 0 or 1");
        LightPhase((self.0 + bit) % 4)
    }

    pub fn passes_avenue(self) -> bool {
        self.0 == 0
    }

    pub fn passes_cross(self) -> bool {
        self.0 == 2
    }

    pub fn all() -> impl Iterator<Item = LightPhase> {
        (0..4).map(LightPhase)
    }
}

/// Advances a phase by a continue/switch bit: `(phase + bit) mod 4`.
pub fn advance_phase(phase: LightPhase, bit: u8) -> LightPhase {
    phase.advanced(bit)
}

/// One continue/switch bit per controlled intersection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    bits: Vec<u8>,
}

impl Action {
    pub fn new(bits: Vec<u8>) -> Result<Self, EnvError> {
        if bits.iter().any(|&b| b > 1) {
            return Err(EnvError::InvalidParameter(
                "action bits must be 0 or 1".into(),
            ));
        }
        Ok(Action { bits })
    }

    pub fn single(bit: u8) -> Self {
        debug_assert!(bit <= 1);
        Action { bits: vec![bit] }
    }

    pub fn uniform(bit: u8, n: usize) -> Self {
        debug_assert!(bit <= 1);
        Action { bits: vec![bit; n] }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Flow directions at an intersection, matching queue array order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    WestEast = 0,
    NorthSouth = 1,
    EastWest = 2,
    SouthNorth = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::WestEast,
        Direction::NorthSouth,
        Direction::EastWest,
        Direction::SouthNorth,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_avenue(self) -> bool {
        matches!(self, Direction::WestEast | Direction::EastWest)
    }
}

/// Row-major lattice of intersections: `avenues` horizontal roads crossed
/// by `cross_streets` vertical roads. A linear avenue is `avenues = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridTopology {
    pub avenues: usize,
    pub cross_streets: usize,
}

impl GridTopology {
    pub fn new(avenues: usize, cross_streets: usize) -> Result<Self, EnvError> {
        if avenues < 1 || cross_streets < 1 {
            return Err(EnvError::InvalidParameter(
                "grid needs at least one avenue and one cross street".into(),
            ));
        }
        Ok(GridTopology {
            avenues,
            cross_streets,
        })
    }

    pub fn intersections(&self) -> usize {
        self.avenues * self.cross_streets
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.avenues && col < self.cross_streets);
        row * self.cross_streets + col
    }

    pub fn row_col(&self, n: usize) -> (usize, usize) {
        (n / self.cross_streets, n % self.cross_streets)
    }

    /// Next intersection along `dir`, or `None` when the flow exits the
    /// network.
    pub fn downstream(&self, n: usize, dir: Direction) -> Option<usize> {
        let (r, c) = self.row_col(n);
        match dir {
            Direction::WestEast => (c + 1 < self.cross_streets).then(|| self.index(r, c + 1)),
            Direction::EastWest => (c > 0).then(|| self.index(r, c - 1)),
            Direction::NorthSouth => (r + 1 < self.avenues).then(|| self.index(r + 1, c)),
            Direction::SouthNorth => (r > 0).then(|| self.index(r - 1, c)),
        }
    }

    /// Whether external traffic in `dir` enters the network at `n`.
    pub fn is_entry(&self, n: usize, dir: Direction) -> bool {
        let (r, c) = self.row_col(n);
        match dir {
            Direction::WestEast => c == 0,
            Direction::EastWest => c == self.cross_streets - 1,
            Direction::NorthSouth => r == 0,
            Direction::SouthNorth => r == self.avenues - 1,
        }
    }
}

/// How external arrivals are drawn per flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ArrivalKind {
    /// One vehicle with the given probability per slot (avenue / cross).
    Bernoulli { avenue: f64, cross: f64 },
    /// Integer uniform on `[0, cap]` per slot (avenue / cross).
    BoundedUniform { avenue_cap: u64, cross_cap: u64 },
}

/// Routing of traffic through the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalMode {
    /// External arrivals enter only at network boundaries; departures are
    /// enqueued at the downstream neighbor one slot later.
    BoundaryChained,
    /// Every intersection draws external arrivals for all four flows;
    /// departures leave the network immediately.
    PerIntersectionExternal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    pub kind: ArrivalKind,
    pub mode: ArrivalMode,
}

impl ArrivalModel {
    pub fn validate(&self) -> Result<(), EnvError> {
        if let ArrivalKind::Bernoulli { avenue, cross } = self.kind {
            for p in [avenue, cross] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(EnvError::InvalidParameter(format!(
                        "Bernoulli parameter {p} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    fn draw(&self, avenue_flow: bool, rng: &mut impl Rng) -> u64 {
        match self.kind {
            ArrivalKind::Bernoulli { avenue, cross } => {
                let p = if avenue_flow { avenue } else { cross };
                // keep p = 0 and p = 1 exact
                if p <= 0.0 {
                    0
                } else if p >= 1.0 {
                    1
                } else {
                    u64::from(rng.gen::<f64>() < p)
                }
            }
            ArrivalKind::BoundedUniform {
                avenue_cap,
                cross_cap,
            } => {
                let cap = if avenue_flow { avenue_cap } else { cross_cap };
                if cap == 0 {
                    0
                } else {
                    rng.gen_range(0..=cap)
                }
            }
        }
    }

    /// Arrival counts for the two single-intersection flows.
    pub fn sample_single(&self, rng: &mut impl Rng) -> (u64, u64) {
        (self.draw(true, rng), self.draw(false, rng))
    }

    /// External arrival counts for every intersection and direction, in a
    /// fixed draw order (intersection-major, then direction). In
    /// boundary-chained mode only entry intersections draw.
    pub fn sample_grid(&self, topology: &GridTopology, rng: &mut impl Rng) -> Vec<[u64; 4]> {
        let n = topology.intersections();
        let mut out = vec![[0u64; 4]; n];
        for (i, cell) in out.iter_mut().enumerate() {
            for dir in Direction::ALL {
                let external = match self.mode {
                    ArrivalMode::PerIntersectionExternal => true,
                    ArrivalMode::BoundaryChained => topology.is_entry(i, dir),
                };
                if external {
                    cell[dir.index()] = self.draw(dir.is_avenue(), rng);
                }
            }
        }
        out
    }
}

/// Vehicles that may cross per green slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassingRates {
    pub avenue: u64,
    pub cross: u64,
}

impl PassingRates {
    /// One vehicle per slot, matching the queue recursions exactly.
    pub const MODEL: PassingRates = PassingRates {
        avenue: 1,
        cross: 1,
    };
    /// The experiment preset: 16 avenue / 4 cross vehicles per slot.
    pub const EXPERIMENT: PassingRates = PassingRates {
        avenue: 16,
        cross: 4,
    };

    pub fn new(avenue: u64, cross: u64) -> Result<Self, EnvError> {
        if avenue < 1 || cross < 1 {
            return Err(EnvError::InvalidParameter(
                "passing rates must be >= 1".into(),
            ));
        }
        Ok(PassingRates { avenue, cross })
    }

    pub fn for_direction(&self, dir: Direction) -> u64 {
        if dir.is_avenue() {
            self.avenue
        } else {
            self.cross
        }
    }
}
