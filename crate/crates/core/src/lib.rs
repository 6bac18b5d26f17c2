//! Discrete-time traffic-light control laboratory: seedable intersection
//! and grid environments, an exact solver for the single-intersection
//! control problem, from-scratch neural networks with DQN and discretized
//! DDPG on top, reference controllers, the continuous fluid model with its
//! closed-form bounds and exact simulator, and a reproducible experiment
//! harness.

pub mod agents;
pub mod baselines;
pub mod env;
pub mod fluid;
pub mod harness;
pub mod mdp;
pub mod nn;
