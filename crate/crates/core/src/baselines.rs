//! Reference controllers sharing a common policy interface: fixed-cycle,
//! queue-difference thresholding, and the discrete synchronized greenwave.

use serde::{Deserialize, Serialize};

use crate::env::{Action, GridState, SingleState};

/// Deterministic controller for the single intersection.
pub trait SinglePolicy {
    fn act(&mut self, state: &SingleState) -> u8;
    fn reset(&mut self) {}
}

/// Deterministic controller for the grid.
pub trait GridPolicy {
    fn act(&mut self, state: &GridState) -> Action;
    fn reset(&mut self) {}
}

/// Per-phase dwell counts of a fixed cycle, in slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedCycleSpec {
    pub green_slots: u32,
    pub yellow_slots: u32,
    pub red_slots: u32,
    pub orange_slots: u32,
}

impl Default for FixedCycleSpec {
    fn default() -> Self {
        FixedCycleSpec {
            green_slots: 5,
            yellow_slots: 1,
            red_slots: 5,
            orange_slots: 1,
        }
    }
}

impl FixedCycleSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.green_slots < 1
            || self.yellow_slots < 1
            || self.red_slots < 1
            || self.orange_slots < 1
        {
            return Err("fixed-cycle dwells must be >= 1 slot".into());
        }
        Ok(())
    }

    pub fn slots_for(&self, phase: u8) -> u32 {
        match phase {
            0 => self.green_slots,
            1 => self.yellow_slots,
            2 => self.red_slots,
            _ => self.orange_slots,
        }
    }

    pub fn period(&self) -> u32 {
        self.green_slots + self.yellow_slots + self.red_slots + self.orange_slots
    }
}

/// Emits switch exactly when the current phase has dwelt its configured
/// number of slots; ignores queues entirely.
#[derive(Debug, Clone)]
pub struct FixedCyclePolicy {
    spec: FixedCycleSpec,
    dwell: u32,
}

impl FixedCyclePolicy {
    pub fn new(spec: FixedCycleSpec) -> Self {
        FixedCyclePolicy { spec, dwell: 0 }
    }

    fn step(&mut self, phase: u8) -> u8 {
        self.dwell += 1;
        if self.dwell >= self.spec.slots_for(phase) {
            self.dwell = 0;
            1
        } else {
            0
        }
    }
}

impl SinglePolicy for FixedCyclePolicy {
    fn act(&mut self, state: &SingleState) -> u8 {
        self.step(state.phase.value())
    }

    fn reset(&mut self) {
        self.dwell = 0;
    }
}

/// Synchronized grid fixed cycle: every intersection gets the same bit from
/// a shared clock; with per-node start offsets it produces a staggered wave
/// instead.
#[derive(Debug, Clone)]
pub struct GridFixedCyclePolicy {
    spec: FixedCycleSpec,
    offsets: Vec<u32>,
    t: u32,
}

impl GridFixedCyclePolicy {
    /// All intersections in lockstep.
    pub fn synchronized(spec: FixedCycleSpec, intersections: usize) -> Self {
        GridFixedCyclePolicy {
            spec,
            offsets: vec![0; intersections],
            t: 0,
        }
    }

    /// Per-node clock offsets, in slots.
    pub fn staggered(spec: FixedCycleSpec, offsets: Vec<u32>) -> Self {
        GridFixedCyclePolicy {
            spec,
            offsets,
            t: 0,
        }
    }

    /// Phase the cycle clock prescribes at local time `t`.
    fn bit_at(&self, local_t: u32) -> u8 {
        // switch on the last slot of each dwell
        let period = self.spec.period();
        let mut tau = local_t % period;
        for phase in 0..4 {
            let d = self.spec.slots_for(phase);
            if tau < d {
                return u8::from(tau == d - 1);
            }
            tau -= d;
        }
        unreachable!("tau within period")
    }
}

impl GridPolicy for GridFixedCyclePolicy {
    fn act(&mut self, state: &GridState) -> Action {
        let bits = (0..state.intersections())
            .map(|n| {
                let local = self.t + self.offsets[n];
                self.bit_at(local)
            })
            .collect();
        self.t += 1;
        Action::new(bits).expect("bits are 0/1")
    }

    fn reset(&mut self) {
        self.t = 0;
    }
}

/// Queue-difference thresholds per service phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    /// Switch away from avenue green when `x2 - x1 >= tau_green`.
    pub tau_green: u64,
    /// Switch away from cross green when `x1 - x2 >= tau_red`.
    pub tau_red: u64,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec {
            tau_green: 3,
            tau_red: 3,
        }
    }
}

/// Switches when the competing queue leads by the configured margin; the
/// transitional phases are cleared in one slot, the minimum legal dwell.
#[derive(Debug, Clone)]
pub struct ThresholdPolicy {
    pub spec: ThresholdSpec,
}

impl ThresholdPolicy {
    pub fn new(spec: ThresholdSpec) -> Self {
        ThresholdPolicy { spec }
    }
}

impl SinglePolicy for ThresholdPolicy {
    fn act(&mut self, state: &SingleState) -> u8 {
        match state.phase.value() {
            0 => u8::from(state.x2 >= state.x1 + self.spec.tau_green),
            2 => u8::from(state.x1 >= state.x2 + self.spec.tau_red),
            _ => 1,
        }
    }
}

/// Greenwave decision rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum GreenwaveMode {
    /// Threshold on aggregate avenue vs cross queue difference.
    Aggregate { critical: u64 },
    /// Fixed dwells mirroring the fluid greenwave timings.
    Scheduled { spec: FixedCycleSpec },
}

/// All intersections switch simultaneously, either on an aggregate queue
/// difference or on a fixed schedule. Requires a synchronized start; a
/// desynchronized state forces an all-switch and is counted.
#[derive(Debug, Clone)]
pub struct GreenwavePolicy {
    mode: GreenwaveMode,
    clock: FixedCyclePolicy,
    desync_events: usize,
}

impl GreenwavePolicy {
    pub fn new(mode: GreenwaveMode) -> Self {
        let clock_spec = match mode {
            GreenwaveMode::Scheduled { spec } => spec,
            GreenwaveMode::Aggregate { .. } => FixedCycleSpec::default(),
        };
        GreenwavePolicy {
            mode,
            clock: FixedCyclePolicy::new(clock_spec),
            desync_events: 0,
        }
    }

    pub fn desync_events(&self) -> usize {
        self.desync_events
    }

    fn aggregate_bit(&self, state: &GridState, critical: u64) -> u8 {
        let mut avenue = 0u64;
        let mut cross = 0u64;
        for cell in &state.queues {
            avenue += cell[0] + cell[2];
            cross += cell[1] + cell[3];
        }
        match state.phases[0].value() {
            0 => u8::from(cross >= avenue + critical),
            2 => u8::from(avenue >= cross + critical),
            _ => 1,
        }
    }
}

impl GridPolicy for GreenwavePolicy {
    fn act(&mut self, state: &GridState) -> Action {
        let n = state.intersections();
        let synchronized = state.phases.iter().all(|p| *p == state.phases[0]);
        if !synchronized {
            // forced all-switch rather than re-aligning node by node
            self.desync_events += 1;
            return Action::uniform(1, n);
        }
        let bit = match self.mode {
            GreenwaveMode::Aggregate { critical } => self.aggregate_bit(state, critical),
            GreenwaveMode::Scheduled { .. } => {
                let phase = state.phases[0];
                self.clock.step(phase.value())
            }
        };
        Action::uniform(bit, n)
    }

    fn reset(&mut self) {
        self.clock.reset();
    }
}

/// Uniformly random bits; the null model for greenwave detection.
#[derive(Debug, Clone)]
pub struct RandomGridPolicy {
    rng: rand_chacha::ChaCha12Rng,
}

impl RandomGridPolicy {
    pub fn new(rng: rand_chacha::ChaCha12Rng) -> Self {
        RandomGridPolicy { rng }
    }
}

impl GridPolicy for RandomGridPolicy {
    fn act(&mut self, state: &GridState) -> Action {
        use rand::Rng;
        let bits = (0..state.intersections())
            .map(|_| self.rng.gen_range(0..=1))
            .collect();
        Action::new(bits).expect("bits are 0/1")
    }
}
