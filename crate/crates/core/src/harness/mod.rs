//! Experiment harness: configuration, seeded orchestration, metrics, and
//! artifact persistence.

pub mod config;
pub mod metrics;
pub mod rng;
pub mod run;

pub use config::{ExperimentConfig, Scenario};
pub use metrics::{
    detect_greenwave, discounted_cost, discounted_cost_of, synchrony_index, GreenwaveReport,
};
pub use run::{
    build_grid_controller, build_single_controller, compare, eval_grid, eval_single,
    run_experiment, solve_mdp_experiment, train_ddpg_experiment, train_dqn_experiment,
    write_json_lines, write_metrics_json, CompareReport, GridController, MetricsReport,
    SingleController,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// CLI exit code: 2 for configuration errors, 3 for nonconvergence,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::NonConvergence(_) => 3,
            _ => 1,
        }
    }
}

impl From<crate::env::EnvError> for HarnessError {
    fn from(e: crate::env::EnvError) -> Self {
        match e {
            crate::env::EnvError::InvalidParameter(m) => HarnessError::Config(m),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<crate::mdp::MdpError> for HarnessError {
    fn from(e: crate::mdp::MdpError) -> Self {
        match e {
            crate::mdp::MdpError::NonConvergence(m) => HarnessError::NonConvergence(m),
            crate::mdp::MdpError::InvalidParameter(m) => HarnessError::Config(m),
            crate::mdp::MdpError::Io(io) => HarnessError::Io(io),
        }
    }
}

impl From<crate::fluid::FluidError> for HarnessError {
    fn from(e: crate::fluid::FluidError) -> Self {
        match e {
            crate::fluid::FluidError::InvalidParameter(m) => HarnessError::Config(m),
            crate::fluid::FluidError::UnstableSchedule(m) => HarnessError::NonConvergence(m),
            crate::fluid::FluidError::Io(io) => HarnessError::Io(io),
        }
    }
}

impl From<crate::nn::NnError> for HarnessError {
    fn from(e: crate::nn::NnError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}
