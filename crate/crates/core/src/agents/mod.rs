//! Learning agents: DQN for the single intersection and discretized DDPG
//! for the grid, with the replay buffer and exploration noise they share.

mod ddpg;
mod dqn;
mod noise;
mod replay;

pub use ddpg::{binarize, train_ddpg, DdpgAgent, DdpgConfig};
pub use dqn::{epsilon_at, lr_at, train_dqn, DqnAgent, DqnConfig, TargetSync};
pub use noise::{ExplorationNoise, GaussianNoise, NoiseKind, OuNoise};
pub use replay::ReplayBuffer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("buffer holds {have} transitions, batch needs {want}")]
    InsufficientSamples { have: usize, want: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// One experience tuple. The action representation is a bit for DQN and the
/// raw pre-binarization actor output for DDPG.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<A> {
    pub state: Vec<f64>,
    pub action: A,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Per-episode training record, one JSON line each in the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    pub mean_reward: f64,
    /// Time-averaged total queued vehicles.
    pub mean_queue: f64,
    /// Exploration level: epsilon for DQN, noise sigma for DDPG.
    pub exploration: f64,
    pub mean_loss: f64,
    /// Mean actor objective (DDPG only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actor_objective: Option<f64>,
}
