//! Exact solution of the single-intersection control problem on a
//! truncated state space.
//!
//! The queue pair is capped at `x_max` (mass that would leave the box is
//! clamped onto the boundary), arrivals are Bernoulli per flow, and the
//! transition kernel is generated by running the environment's own step
//! function over the four arrival outcomes. Policy iteration and value
//! iteration then serve as the optimality oracle for the learned
//! controllers.

mod analysis;
mod io;
mod solve;

pub use io::{read_tables, write_tables};
pub use analysis::{
    extract_threshold_curve, policy_agreement, simulated_visitation, stationary_distribution,
    ThresholdCurve,
};
pub use solve::{
    bellman_residual, greedy_policy, policy_iteration, value_iteration, SolveOptions, SolveResult,
};

use thiserror::Error;

use crate::env::{step_single, LightPhase, PassingRates, SingleState};

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Enumeration of `(x1, x2, phase)` with `0 <= xi <= x_max`, in a fixed
/// order: phase fastest, then x2, then x1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncatedSpace {
    x_max: u64,
}

impl TruncatedSpace {
    pub fn new(x_max: u64) -> Self {
        TruncatedSpace { x_max }
    }

    pub fn x_max(&self) -> u64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        let w = self.x_max as usize + 1;
        w * w * LightPhase::COUNT
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, s: &SingleState) -> usize {
        debug_assert!(s.x1 <= self.x_max && s.x2 <= self.x_max);
        let w = self.x_max as usize + 1;
        ((s.x1 as usize * w) + s.x2 as usize) * LightPhase::COUNT + s.phase.value() as usize
    }

    pub fn state(&self, idx: usize) -> SingleState {
        debug_assert!(idx < self.len());
        let w = self.x_max as usize + 1;
        let phase = (idx % LightPhase::COUNT) as u8;
        let rest = idx / LightPhase::COUNT;
        SingleState::new(
            (rest / w) as u64,
            (rest % w) as u64,
            LightPhase::new(phase).expect("phase in range"),
        )
    }

    pub fn states(&self) -> impl Iterator<Item = SingleState> + '_ {
        (0..self.len()).map(move |i| self.state(i))
    }

    fn clamp(&self, x: u64) -> u64 {
        x.min(self.x_max)
    }
}

/// Sparse transition kernel plus the stage reward `r(s) = -Z(X_s)`.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    space: TruncatedSpace,
    /// Per state and action: `(next state index, probability)`.
    transitions: Vec<[Vec<(u32, f64)>; 2]>,
    rewards: Vec<f64>,
    arrival_probs: (f64, f64),
    rates: PassingRates,
}

/// Builds the kernel under Bernoulli(p1, p2) arrivals by enumerating the
/// four arrival outcomes through the environment step; arrivals that would
/// exceed `x_max` are clamped so each row keeps total mass 1.
pub fn build_transitions(
    space: TruncatedSpace,
    p1: f64,
    p2: f64,
    rates: PassingRates,
) -> Result<TransitionModel, MdpError> {
    for p in [p1, p2] {
        if !(0.0..=1.0).contains(&p) {
            return Err(MdpError::InvalidParameter(format!(
                "Bernoulli parameter {p} outside [0, 1]"
            )));
        }
    }
    let mut transitions = Vec::with_capacity(space.len());
    let mut rewards = Vec::with_capacity(space.len());
    for s in space.states() {
        rewards.push(-s.cost());
        let mut per_action: [Vec<(u32, f64)>; 2] = [Vec::new(), Vec::new()];
        for (bit, row) in per_action.iter_mut().enumerate() {
            for c1 in 0..=1u64 {
                for c2 in 0..=1u64 {
                    let prob = (if c1 == 1 { p1 } else { 1.0 - p1 })
                        * (if c2 == 1 { p2 } else { 1.0 - p2 });
                    if prob == 0.0 {
                        continue;
                    }
                    let stepped = step_single(&s, bit as u8, (c1, c2), rates).next;
                    let clamped = SingleState::new(
                        space.clamp(stepped.x1),
                        space.clamp(stepped.x2),
                        stepped.phase,
                    );
                    let idx = space.index(&clamped) as u32;
                    match row.iter_mut().find(|(i, _)| *i == idx) {
                        Some((_, p)) => *p += prob,
                        None => row.push((idx, prob)),
                    }
                }
            }
            let mass: f64 = row.iter().map(|(_, p)| p).sum();
            debug_assert!((mass - 1.0).abs() < 1e-12, "transition mass {mass}");
        }
        transitions.push(per_action);
    }
    Ok(TransitionModel {
        space,
        transitions,
        rewards,
        arrival_probs: (p1, p2),
        rates,
    })
}

impl TransitionModel {
    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    pub fn arrival_probs(&self) -> (f64, f64) {
        self.arrival_probs
    }

    pub fn rates(&self) -> PassingRates {
        self.rates
    }

    pub fn successors(&self, state: usize, action: u8) -> &[(u32, f64)] {
        &self.transitions[state][action as usize]
    }

    /// Stage reward `-Z(X_s)` of the current state.
    pub fn reward(&self, state: usize) -> f64 {
        self.rewards[state]
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// State values, indexed by [`TruncatedSpace`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub values: Vec<f64>,
}

/// Continue/switch decision per state, indexed by [`TruncatedSpace`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTable {
    pub actions: Vec<u8>,
}

impl PolicyTable {
    pub fn action(&self, idx: usize) -> u8 {
        self.actions[idx]
    }
}
