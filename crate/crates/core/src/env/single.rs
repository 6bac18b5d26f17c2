//! Single-intersection dynamics: two crossing flows and one light.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{ArrivalModel, LightPhase, PassingRates};

/// Queue lengths of both flows plus the light configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SingleState {
    pub x1: u64,
    pub x2: u64,
    pub phase: LightPhase,
}

impl SingleState {
    pub fn empty() -> Self {
        SingleState {
            x1: 0,
            x2: 0,
            phase: LightPhase::GREEN,
        }
    }

    pub fn new(x1: u64, x2: u64, phase: LightPhase) -> Self {
        SingleState { x1, x2, phase }
    }

    /// Congestion cost `x1^2 + x2^2`.
    pub fn cost(&self) -> f64 {
        (self.x1 as u128 * self.x1 as u128 + self.x2 as u128 * self.x2 as u128) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleStepResult {
    pub next: SingleState,
    /// Negative sum of squared post-step queue lengths.
    pub reward: f64,
    pub departures: (u64, u64),
}

/// Departures under the current light: green passes up to `rates.avenue`
/// waiting avenue vehicles, red passes up to `rates.cross` waiting cross
/// vehicles, the transitional phases pass nothing.
pub fn departures_single(state: &SingleState, rates: PassingRates) -> (u64, u64) {
    if state.phase.passes_avenue() {
        (rates.avenue.min(state.x1), 0)
    } else if state.phase.passes_cross() {
        (0, rates.cross.min(state.x2))
    } else {
        (0, 0)
    }
}

/// One environment slot: departures under the current phase, queue update
/// by the given arrival counts, phase advance by the action bit.
pub fn step_single(
    state: &SingleState,
    bit: u8,
    arrivals: (u64, u64),
    rates: PassingRates,
) -> SingleStepResult {
    let (d1, d2) = departures_single(state, rates);
    let next = SingleState {
        x1: state.x1 + arrivals.0 - d1,
        x2: state.x2 + arrivals.1 - d2,
        phase: state.phase.advanced(bit),
    };
    SingleStepResult {
        reward: -next.cost(),
        next,
        departures: (d1, d2),
    }
}

/// Seedable single-intersection environment owning its arrival stream.
#[derive(Debug, Clone)]
pub struct SingleEnv {
    state: SingleState,
    arrivals: ArrivalModel,
    rates: PassingRates,
    rng: ChaCha12Rng,
}

impl SingleEnv {
    pub fn new(arrivals: ArrivalModel, rates: PassingRates, rng: ChaCha12Rng) -> Self {
        SingleEnv {
            state: SingleState::empty(),
            arrivals,
            rates,
            rng,
        }
    }

    pub fn state(&self) -> SingleState {
        self.state
    }

    pub fn rates(&self) -> PassingRates {
        self.rates
    }

    /// Resets queues and light to the empty initial state. The arrival
    /// stream continues; reseed by constructing a new environment.
    pub fn reset(&mut self) -> SingleState {
        self.state = SingleState::empty();
        self.state
    }

    pub fn set_state(&mut self, state: SingleState) {
        self.state = state;
    }

    pub fn step(&mut self, bit: u8) -> SingleStepResult {
        let arrivals = self.arrivals.sample_single(&mut self.rng);
        let result = step_single(&self.state, bit, arrivals, self.rates);
        self.state = result.next;
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ArrivalKind, ArrivalMode};
    use rand::SeedableRng;

    fn st(x1: u64, x2: u64, phase: u8) -> SingleState {
        SingleState::new(x1, x2, LightPhase::new(phase).unwrap())
    }

    #[test]
    fn departures_follow_the_light() {
        let r = PassingRates::MODEL;
        assert_eq!(departures_single(&st(5, 2, 0), r), (1, 0));
        assert_eq!(departures_single(&st(0, 7, 0), r), (0, 0));
        assert_eq!(departures_single(&st(5, 2, 1), r), (0, 0));
        assert_eq!(departures_single(&st(5, 2, 2), r), (0, 1));
        assert_eq!(departures_single(&st(5, 2, 3), r), (0, 0));
    }

    #[test]
    fn departures_respect_passing_rates() {
        let r = PassingRates::EXPERIMENT;
        assert_eq!(departures_single(&st(20, 9, 0), r), (16, 0));
        assert_eq!(departures_single(&st(5, 9, 0), r), (5, 0));
        assert_eq!(departures_single(&st(20, 9, 2), r), (0, 4));
    }

    #[test]
    fn step_hand_traces() {
        let r = PassingRates::MODEL;
        // continue on green: one avenue departure, one avenue arrival
        let a = step_single(&st(2, 3, 0), 0, (1, 0), r);
        assert_eq!(a.next, st(2, 3, 0));
        assert_eq!(a.reward, -13.0);
        assert_eq!(a.departures, (1, 0));

        // empty network fixed point
        let b = step_single(&st(0, 0, 0), 0, (0, 0), r);
        assert_eq!(b.next, st(0, 0, 0));
        assert_eq!(b.reward, 0.0);

        // switch away from red after serving one cross vehicle
        let c = step_single(&st(1, 1, 2), 1, (0, 0), r);
        assert_eq!(c.next, st(1, 0, 3));
        assert_eq!(c.reward, -1.0);
    }

    #[test]
    fn reward_is_recomputable_from_next_state() {
        let r = PassingRates::MODEL;
        for phase in 0..4 {
            for bit in 0..=1 {
                let res = step_single(&st(3, 7, phase), bit, (1, 1), r);
                assert_eq!(res.reward, -res.next.cost());
            }
        }
    }

    #[test]
    fn env_is_deterministic_under_a_fixed_seed() {
        let arrivals = ArrivalModel {
            kind: ArrivalKind::Bernoulli {
                avenue: 0.25,
                cross: 0.25,
            },
            mode: ArrivalMode::PerIntersectionExternal,
        };
        let run = || {
            let rng = ChaCha12Rng::seed_from_u64(7);
            let mut env = SingleEnv::new(arrivals, PassingRates::MODEL, rng);
            (0..200)
                .map(|t| {
                    let bit = u8::from(t % 3 == 0);
                    let r = env.step(bit);
                    (r.next, r.reward.to_bits())
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
