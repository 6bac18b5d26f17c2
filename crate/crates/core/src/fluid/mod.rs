//! Continuous-time fluid model of an avenue with cross streets.
//!
//! Avenue traffic enters node 1 at constant rate `lambda0`, traverses all
//! nodes, and leaves after node N; cross traffic at rate `lambda_n` crosses
//! node n only. Lights run periodic cycles yellow -> red -> orange -> green
//! (a control cycle ends with its green period). Queues are piecewise
//! linear: closed forms for stability conditions, lower bounds, and the
//! synchronized greenwave schedule live in [`bounds`]; an exact event-driven
//! simulator that verifies them lives in [`sim`].

mod bounds;
mod sim;
mod sweep;

pub use bounds::{
    check_stability, free_bounds_tight_at_zero, greenwave_averages, greenwave_schedule,
    lemma1_bounds, optimality_gap, prop1_lower_bounds, GreenwaveDerived, Lemma1Bounds, NodeStability,
    OptimalityGap, Prop1Bounds, StabilityReport,
};
pub use sim::{simulate_fluid, simulate_fluid_opts, FluidTrajectory, SimOptions};
pub use sweep::{sweep_point, write_sweep_csv, SweepRow};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FluidError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("schedule is unstable: {0}")]
    UnstableSchedule(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Arrival rates and transition-phase durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    /// Avenue arrival rate at node 1.
    pub lambda0: f64,
    /// Cross-street arrival rate per node.
    pub lambda: Vec<f64>,
    /// Yellow duration (time units), common to all nodes.
    pub yellow: f64,
    /// Orange duration, common to all nodes.
    pub orange: f64,
}

impl FluidParams {
    pub fn new(lambda0: f64, lambda: Vec<f64>, yellow: f64, orange: f64) -> Result<Self, FluidError> {
        if lambda.is_empty() {
            return Err(FluidError::InvalidParameter("need at least one node".into()));
        }
        if !(yellow > 0.0) || !(orange > 0.0) {
            return Err(FluidError::InvalidParameter(
                "yellow and orange durations must be > 0".into(),
            ));
        }
        if !(lambda0 >= 0.0) {
            return Err(FluidError::InvalidParameter("lambda0 must be >= 0".into()));
        }
        for (n, &l) in lambda.iter().enumerate() {
            if !(l >= 0.0) {
                return Err(FluidError::InvalidParameter(format!(
                    "lambda[{n}] must be >= 0"
                )));
            }
            if lambda0 + l >= 1.0 {
                return Err(FluidError::InvalidParameter(format!(
                    "lambda0 + lambda[{n}] = {} violates the capacity condition < 1",
                    lambda0 + l
                )));
            }
        }
        Ok(FluidParams {
            lambda0,
            lambda,
            yellow,
            orange,
        })
    }

    /// Uniform cross rates at every node.
    pub fn uniform(
        lambda0: f64,
        lambda1: f64,
        nodes: usize,
        yellow: f64,
        orange: f64,
    ) -> Result<Self, FluidError> {
        FluidParams::new(lambda0, vec![lambda1; nodes], yellow, orange)
    }

    pub fn nodes(&self) -> usize {
        self.lambda.len()
    }

    /// Y + O.
    pub fn switch_time(&self) -> f64 {
        self.yellow + self.orange
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda.iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn is_uniform(&self) -> bool {
        self.lambda.iter().all(|&l| l == self.lambda[0])
    }
}

/// Periodic per-node green/red durations with phase offsets. Within one
/// cycle the segments run yellow, red, orange, green.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub green: Vec<f64>,
    pub red: Vec<f64>,
    /// Start-time shift of each node's cycle, in `[0, U_n)`.
    pub offset: Vec<f64>,
    pub yellow: f64,
    pub orange: f64,
}

impl Schedule {
    pub fn new(
        green: Vec<f64>,
        red: Vec<f64>,
        offset: Vec<f64>,
        yellow: f64,
        orange: f64,
    ) -> Result<Self, FluidError> {
        let n = green.len();
        if n == 0 || red.len() != n || offset.len() != n {
            return Err(FluidError::InvalidParameter(
                "green/red/offset lengths must match and be non-empty".into(),
            ));
        }
        if !(yellow > 0.0) || !(orange > 0.0) {
            return Err(FluidError::InvalidParameter(
                "yellow and orange durations must be > 0".into(),
            ));
        }
        for i in 0..n {
            if !(green[i] > 0.0) || !(red[i] > 0.0) {
                return Err(FluidError::InvalidParameter(format!(
                    "green and red durations must be > 0 at node {i}"
                )));
            }
            let u = green[i] + red[i] + yellow + orange;
            if !(0.0..u).contains(&offset[i]) {
                return Err(FluidError::InvalidParameter(format!(
                    "offset {} outside [0, {u}) at node {i}",
                    offset[i]
                )));
            }
        }
        Ok(Schedule {
            green,
            red,
            offset,
            yellow,
            orange,
        })
    }

    /// Same green/red at every node, given offsets.
    pub fn uniform(
        green: f64,
        red: f64,
        offsets: Vec<f64>,
        yellow: f64,
        orange: f64,
    ) -> Result<Self, FluidError> {
        let n = offsets.len();
        Schedule::new(vec![green; n], vec![red; n], offsets, yellow, orange)
    }

    pub fn nodes(&self) -> usize {
        self.green.len()
    }

    /// Cycle length `U_n = G_n + R_n + Y + O`.
    pub fn cycle(&self, n: usize) -> f64 {
        self.green[n] + self.red[n] + self.yellow + self.orange
    }

    /// Segment boundaries within a cycle: yellow ends, red ends, orange
    /// ends, green ends (= cycle length).
    pub(crate) fn prefix(&self, n: usize) -> [f64; 4] {
        [
            self.yellow,
            self.yellow + self.red[n],
            self.yellow + self.red[n] + self.orange,
            self.cycle(n),
        ]
    }
}

/// Light state of one fluid node; avenue flows during green, cross flows
/// during red.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluidPhase {
    Yellow,
    Red,
    Orange,
    Green,
}

impl FluidPhase {
    pub(crate) fn from_slot(slot: u8) -> FluidPhase {
        match slot {
            0 => FluidPhase::Yellow,
            1 => FluidPhase::Red,
            2 => FluidPhase::Orange,
            _ => FluidPhase::Green,
        }
    }
}
