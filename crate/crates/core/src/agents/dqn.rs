//! DQN for the single intersection.
//!
//! The Q-network maps an encoded state (scaled queue lengths plus a one-hot
//! light phase) to the two action values. Updates regress onto
//! `r + gamma * max_a Q(s', a | theta_{k-1})`, where the bootstrap
//! parameters are by default the online parameters snapshotted before each
//! update.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::env::{SingleEnv, SingleState};
use crate::mdp::{PolicyTable, TruncatedSpace};
use crate::nn::{Activation, AdamParams, AdamState, LayerSpec, Mat, Mlp};

use super::{EpisodeLog, ReplayBuffer, Transition};

/// When the bootstrap parameters are refreshed from the online network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSync {
    /// Snapshot before every update (the literal theta_{k-1} rule).
    PerUpdate,
    /// Copy every `n` updates.
    Every(u64),
}

#[derive(Debug, Clone)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub lr: f64,
    /// Final learning rate; lr anneals linearly over the training steps.
    pub lr_end: f64,
    pub batch: usize,
    pub capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Steps over which epsilon decays linearly; flat afterwards.
    pub eps_decay_steps: usize,
    pub target_sync: TargetSync,
    /// Queue counts are divided by this before entering the network.
    pub queue_scale: f64,
    /// Queue counts up to this value also enter as one-hot features, which
    /// sharpens the Q function near the switching boundary; 0 disables.
    pub onehot_queues: u64,
    /// Rewards are multiplied by this inside updates.
    pub reward_scale: f64,
    pub warmup: usize,
    pub update_every: usize,
    pub steps: usize,
    pub episode_len: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            hidden: vec![400, 400],
            gamma: 0.99,
            lr: 1e-3,
            lr_end: 1e-5,
            batch: 64,
            capacity: 100_000,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_steps: 15_000,
            target_sync: TargetSync::PerUpdate,
            queue_scale: 10.0,
            onehot_queues: 12,
            reward_scale: 0.05,
            warmup: 1_000,
            update_every: 1,
            steps: 30_000,
            episode_len: 150,
        }
    }
}

/// Linear learning-rate schedule over the configured training steps.
pub fn lr_at(cfg: &DqnConfig, step: usize) -> f64 {
    if cfg.steps <= 1 || step >= cfg.steps {
        return cfg.lr_end;
    }
    let frac = step as f64 / (cfg.steps - 1) as f64;
    cfg.lr + (cfg.lr_end - cfg.lr) * frac
}

/// Linear epsilon schedule.
pub fn epsilon_at(cfg: &DqnConfig, step: usize) -> f64 {
    if cfg.eps_decay_steps == 0 || step >= cfg.eps_decay_steps {
        return cfg.eps_end;
    }
    let frac = step as f64 / cfg.eps_decay_steps as f64;
    cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac
}

fn encoded_dim(cfg: &DqnConfig) -> usize {
    let onehot = if cfg.onehot_queues > 0 {
        2 * (cfg.onehot_queues as usize + 1)
    } else {
        0
    };
    6 + onehot
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub q: Mlp,
    pub target: Mlp,
    adam: AdamState,
    cfg: DqnConfig,
    updates: u64,
}

impl DqnAgent {
    pub fn new(cfg: DqnConfig, rng: &mut impl Rng) -> Self {
        let mut specs = Vec::new();
        let mut prev = encoded_dim(&cfg);
        for &h in &cfg.hidden {
            specs.push(LayerSpec::new(prev, h, Activation::Tanh));
            prev = h;
        }
        specs.push(LayerSpec::new(prev, 2, Activation::Identity));
        let q = Mlp::new_seeded(&specs, rng).expect("valid q-net specs");
        let target = q.clone();
        let adam = AdamState::new(&q, AdamParams::with_lr(cfg.lr));
        DqnAgent {
            q,
            target,
            adam,
            cfg,
            updates: 0,
        }
    }

    /// Wraps a loaded network, validating its shape against the encoding.
    pub fn from_network(cfg: DqnConfig, net: Mlp) -> Result<Self, super::AgentError> {
        if net.in_dim() != encoded_dim(&cfg) || net.out_dim() != 2 {
            return Err(super::AgentError::InvalidConfig(format!(
                "q-network is {}->{}, expected {}->2",
                net.in_dim(),
                net.out_dim(),
                encoded_dim(&cfg)
            )));
        }
        let adam = AdamState::new(&net, AdamParams::with_lr(cfg.lr));
        Ok(DqnAgent {
            target: net.clone(),
            q: net,
            adam,
            cfg,
            updates: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.adam.set_lr(lr);
    }

    pub fn encode(&self, state: &SingleState) -> Vec<f64> {
        let mut v = vec![0.0; encoded_dim(&self.cfg)];
        v[0] = state.x1 as f64 / self.cfg.queue_scale;
        v[1] = state.x2 as f64 / self.cfg.queue_scale;
        v[2 + state.phase.value() as usize] = 1.0;
        if self.cfg.onehot_queues > 0 {
            let levels = self.cfg.onehot_queues as usize + 1;
            let x1 = (state.x1.min(self.cfg.onehot_queues)) as usize;
            let x2 = (state.x2.min(self.cfg.onehot_queues)) as usize;
            v[6 + x1] = 1.0;
            v[6 + levels + x2] = 1.0;
        }
        v
    }

    pub fn q_values(&self, encoded: &[f64]) -> [f64; 2] {
        let out = self
            .q
            .forward(&Mat::row_vector(encoded.to_vec()))
            .expect("encoded state dim");
        [out.get(0, 0), out.get(0, 1)]
    }

    /// Greedy action with ties toward continue.
    pub fn greedy(&self, encoded: &[f64]) -> u8 {
        let [q0, q1] = self.q_values(encoded);
        u8::from(q1 > q0)
    }

    /// Epsilon-greedy action.
    pub fn select(&self, encoded: &[f64], epsilon: f64, rng: &mut impl Rng) -> u8 {
        if rng.gen::<f64>() < epsilon {
            rng.gen_range(0..=1)
        } else {
            self.greedy(encoded)
        }
    }

    /// One minibatch update; returns the TD loss.
    pub fn update(&mut self, batch: &[&Transition<u8>]) -> f64 {
        let m = batch.len();
        assert!(m >= 1, "batch must be non-empty");
        match self.cfg.target_sync {
            TargetSync::PerUpdate => self.target = self.q.clone(),
            TargetSync::Every(n) => {
                if self.updates % n.max(1) == 0 {
                    self.target = self.q.clone();
                }
            }
        }
        self.updates += 1;

        let states = Mat::from_fn(m, self.q.in_dim(), |i, j| batch[i].state[j]);
        let next_states = Mat::from_fn(m, self.q.in_dim(), |i, j| batch[i].next_state[j]);
        let next_q = self.target.forward(&next_states).expect("target forward");
        let targets: Vec<f64> = (0..m)
            .map(|i| {
                let best = next_q.get(i, 0).max(next_q.get(i, 1));
                batch[i].reward * self.cfg.reward_scale + self.cfg.gamma * best
            })
            .collect();

        let cache = self.q.forward_cached(&states).expect("online forward");
        let q = cache.output();
        let mut upstream = Mat::zeros(m, 2);
        let mut loss = 0.0;
        for i in 0..m {
            let a = batch[i].action as usize;
            let err = targets[i] - q.get(i, a);
            loss += err * err;
            upstream.set(i, a, -2.0 * err / m as f64);
        }
        let (grads, _) = self.q.backward(&cache, &upstream).expect("backward");
        self.adam.apply(&mut self.q, &grads);
        loss / m as f64
    }

    /// Greedy action for every state of a truncated space.
    pub fn greedy_policy_table(&self, space: &TruncatedSpace) -> PolicyTable {
        let actions = space
            .states()
            .map(|s| self.greedy(&self.encode(&s)))
            .collect();
        PolicyTable { actions }
    }
}

/// Runs the training loop: episodes of `episode_len` steps from the empty
/// state, epsilon-greedy exploration, one minibatch update per
/// `update_every` steps once the buffer is warm.
pub fn train_dqn(
    env: &mut SingleEnv,
    cfg: DqnConfig,
    init_rng: &mut ChaCha12Rng,
    explore_rng: &mut ChaCha12Rng,
) -> (DqnAgent, Vec<EpisodeLog>) {
    let mut agent = DqnAgent::new(cfg.clone(), init_rng);
    let mut buffer: ReplayBuffer<u8> = ReplayBuffer::new(cfg.capacity);
    let mut logs = Vec::new();

    let mut episode = 0usize;
    let mut ep_reward = 0.0;
    let mut ep_queue = 0.0;
    let mut ep_losses = Vec::new();
    let mut ep_steps = 0usize;
    env.reset();

    for step in 0..cfg.steps {
        let eps = epsilon_at(&cfg, step);
        agent.set_lr(lr_at(&cfg, step));
        let state = env.state();
        let encoded = agent.encode(&state);
        let bit = agent.select(&encoded, eps, explore_rng);
        let result = env.step(bit);
        let next_encoded = agent.encode(&result.next);
        buffer.push(Transition {
            state: encoded,
            action: bit,
            reward: result.reward,
            next_state: next_encoded,
        });
        ep_reward += result.reward;
        ep_queue += (result.next.x1 + result.next.x2) as f64;
        ep_steps += 1;

        if buffer.len() >= cfg.warmup.max(cfg.batch) && step % cfg.update_every == 0 {
            let batch = buffer
                .sample(cfg.batch, explore_rng)
                .expect("buffer warm enough");
            ep_losses.push(agent.update(&batch));
        }

        if ep_steps == cfg.episode_len {
            logs.push(EpisodeLog {
                episode,
                steps: ep_steps,
                mean_reward: ep_reward / ep_steps as f64,
                mean_queue: ep_queue / ep_steps as f64,
                exploration: eps,
                mean_loss: mean(&ep_losses),
                actor_objective: None,
            });
            episode += 1;
            ep_reward = 0.0;
            ep_queue = 0.0;
            ep_losses.clear();
            ep_steps = 0;
            env.reset();
        }
    }
    (agent, logs)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}
