//! Discretized DDPG for the grid.
//!
//! The actor maps the full 5N observation (four queue counts and the light
//! phase per intersection) to one value in (0, 1) per intersection through
//! a steepened sigmoid output; exploration noise is added to that raw
//! output, clipped to [0, 1], and node-wise binarization at 0.5 produces
//! the continue/switch bits. The critic scores (observation, raw action)
//! pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::env::{Action, GridEnv, GridState};
use crate::nn::{
    chain_critic_to_actor, soft_update, Activation, AdamParams, AdamState, LayerSpec, Mat, Mlp,
};

use super::{EpisodeLog, ExplorationNoise, NoiseKind, ReplayBuffer, Transition};

#[derive(Debug, Clone)]
pub struct DdpgConfig {
    pub hidden_actor: Vec<usize>,
    pub hidden_critic: Vec<usize>,
    pub gamma: f64,
    /// Soft target blend rate.
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch: usize,
    pub capacity: usize,
    /// Steepening ratio of the actor's output sigmoid.
    pub alpha: f64,
    pub noise: NoiseKind,
    pub queue_scale: f64,
    pub reward_scale: f64,
    pub warmup: usize,
    pub update_every: usize,
    pub steps: usize,
    pub episode_len: usize,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        DdpgConfig {
            hidden_actor: vec![600; 4],
            hidden_critic: vec![600; 4],
            gamma: 0.99,
            tau: 0.001,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            batch: 64,
            capacity: 100_000,
            alpha: 10.0,
            noise: NoiseKind::ou_default(),
            queue_scale: 10.0,
            reward_scale: 1e-3,
            warmup: 1_000,
            update_every: 1,
            steps: 45_000,
            episode_len: 150,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    adam_actor: AdamState,
    adam_critic: AdamState,
    cfg: DdpgConfig,
    intersections: usize,
}

/// Node-wise binarization: bit = 1 iff the raw value is at least 0.5.
pub fn binarize(raw: &[f64]) -> Vec<u8> {
    raw.iter().map(|&v| u8::from(v >= 0.5)).collect()
}

impl DdpgAgent {
    pub fn new(cfg: DdpgConfig, intersections: usize, rng: &mut impl Rng) -> Self {
        let obs_dim = 5 * intersections;
        let mut actor_specs = Vec::new();
        let mut prev = obs_dim;
        for &h in &cfg.hidden_actor {
            actor_specs.push(LayerSpec::new(prev, h, Activation::Tanh));
            prev = h;
        }
        actor_specs.push(LayerSpec::new(
            prev,
            intersections,
            Activation::SteepenedSigmoid(cfg.alpha),
        ));
        let actor = Mlp::new_seeded(&actor_specs, rng).expect("valid actor specs");

        let mut critic_specs = Vec::new();
        prev = obs_dim + intersections;
        for &h in &cfg.hidden_critic {
            critic_specs.push(LayerSpec::new(prev, h, Activation::Tanh));
            prev = h;
        }
        critic_specs.push(LayerSpec::new(prev, 1, Activation::Identity));
        let critic = Mlp::new_seeded(&critic_specs, rng).expect("valid critic specs");

        let adam_actor = AdamState::new(&actor, AdamParams::with_lr(cfg.lr_actor));
        let adam_critic = AdamState::new(&critic, AdamParams::with_lr(cfg.lr_critic));
        DdpgAgent {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            adam_actor,
            adam_critic,
            cfg,
            intersections,
        }
    }

    /// Wraps a loaded actor for evaluation; the critic is rebuilt fresh and
    /// only matters if training resumes.
    pub fn from_actor(
        cfg: DdpgConfig,
        intersections: usize,
        actor: Mlp,
    ) -> Result<Self, super::AgentError> {
        if actor.in_dim() != 5 * intersections || actor.out_dim() != intersections {
            return Err(super::AgentError::InvalidConfig(format!(
                "actor is {}->{}, expected {}->{}",
                actor.in_dim(),
                actor.out_dim(),
                5 * intersections,
                intersections
            )));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut fresh = DdpgAgent::new(cfg, intersections, &mut rng);
        fresh.target_actor = actor.clone();
        fresh.adam_actor = AdamState::new(&actor, AdamParams::with_lr(fresh.cfg.lr_actor));
        fresh.actor = actor;
        Ok(fresh)
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.cfg
    }

    pub fn intersections(&self) -> usize {
        self.intersections
    }

    /// The 5N observation vector: scaled queue counts and the phase value
    /// mapped into [0, 1], per intersection.
    pub fn encode(&self, state: &GridState) -> Vec<f64> {
        let mut v = Vec::with_capacity(5 * state.intersections());
        for n in 0..state.intersections() {
            for d in 0..4 {
                v.push(state.queues[n][d] as f64 / self.cfg.queue_scale);
            }
            v.push(state.phases[n].value() as f64 / 3.0);
        }
        v
    }

    /// Raw actor output plus the binarized action; exploration noise is
    /// added to the raw output and clipped to [0, 1] before thresholding.
    pub fn select(
        &self,
        encoded: &[f64],
        noise: Option<(&mut ExplorationNoise, &mut ChaCha12Rng)>,
        ) -> (Vec<f64>, Action) {
        let out = self
            .actor
            .forward(&Mat::row_vector(encoded.to_vec()))
            .expect("encoded observation dim");
        let mut raw: Vec<f64> = out.data().to_vec();
        if let Some((noise, rng)) = noise {
            let mut perturbation = vec![0.0; raw.len()];
            noise.sample_into(&mut perturbation, rng);
            for (r, p) in raw.iter_mut().zip(&perturbation) {
                *r = (*r + p).clamp(0.0, 1.0);
            }
        }
        let bits = binarize(&raw);
        (raw, Action::new(bits).expect("bits are 0/1"))
    }

    /// One minibatch update; returns (critic loss, actor objective).
    pub fn update(&mut self, batch: &[&Transition<Vec<f64>>]) -> (f64, f64) {
        let m = batch.len();
        assert!(m >= 1, "batch must be non-empty");
        let obs_dim = 5 * self.intersections;
        let act_dim = self.intersections;

        let states = Mat::from_fn(m, obs_dim, |i, j| batch[i].state[j]);
        let actions = Mat::from_fn(m, act_dim, |i, j| batch[i].action[j]);
        let next_states = Mat::from_fn(m, obs_dim, |i, j| batch[i].next_state[j]);

        // y = r + gamma Q'(s', mu'(s'))
        let next_actions = self.target_actor.forward(&next_states).expect("target actor");
        let next_q = self
            .target_critic
            .forward(&next_states.hconcat(&next_actions))
            .expect("target critic");
        let targets: Vec<f64> = (0..m)
            .map(|i| batch[i].reward * self.cfg.reward_scale + self.cfg.gamma * next_q.get(i, 0))
            .collect();

        // critic regression
        let critic_in = states.hconcat(&actions);
        let cache = self.critic.forward_cached(&critic_in).expect("critic forward");
        let q = cache.output();
        let mut upstream = Mat::zeros(m, 1);
        let mut critic_loss = 0.0;
        for i in 0..m {
            let err = q.get(i, 0) - targets[i];
            critic_loss += err * err;
            upstream.set(i, 0, 2.0 * err / m as f64);
        }
        critic_loss /= m as f64;
        let (critic_grads, _) = self.critic.backward(&cache, &upstream).expect("critic backward");
        self.adam_critic.apply(&mut self.critic, &critic_grads);

        // actor ascends mean_j Q(s_j, mu(s_j))
        let (mut actor_grads, actor_objective) =
            chain_critic_to_actor(&self.critic, &self.actor, &states).expect("chain rule");
        actor_grads.scale(-1.0);
        self.adam_actor.apply(&mut self.actor, &actor_grads);

        soft_update(&mut self.target_critic, &self.critic, self.cfg.tau);
        soft_update(&mut self.target_actor, &self.actor, self.cfg.tau);
        (critic_loss, actor_objective)
    }
}

/// DDPG training loop on a grid environment: episodes from the empty state,
/// noise reset per episode, one update per `update_every` steps once warm.
pub fn train_ddpg(
    env: &mut GridEnv,
    cfg: DdpgConfig,
    init_rng: &mut ChaCha12Rng,
    explore_rng: &mut ChaCha12Rng,
) -> (DdpgAgent, Vec<EpisodeLog>) {
    let n = env.topology().intersections();
    let mut agent = DdpgAgent::new(cfg.clone(), n, init_rng);
    let mut noise = cfg.noise.build(n);
    let mut buffer: ReplayBuffer<Vec<f64>> = ReplayBuffer::new(cfg.capacity);
    let mut logs = Vec::new();

    let mut episode = 0usize;
    let mut ep_reward = 0.0;
    let mut ep_queue = 0.0;
    let mut ep_critic = Vec::new();
    let mut ep_actor = Vec::new();
    let mut ep_steps = 0usize;
    env.reset();

    for step in 0..cfg.steps {
        let encoded = agent.encode(env.state());
        let (raw, action) = agent.select(&encoded, Some((&mut noise, explore_rng)));
        let result = env.step(&action).expect("action length matches");
        let next_encoded = agent.encode(&result.next);
        buffer.push(Transition {
            state: encoded,
            action: raw,
            reward: result.reward,
            next_state: next_encoded,
        });
        ep_reward += result.reward;
        ep_queue += result.next.total_queued() as f64;
        ep_steps += 1;

        if buffer.len() >= cfg.warmup.max(cfg.batch) && step % cfg.update_every == 0 {
            let batch = buffer
                .sample(cfg.batch, explore_rng)
                .expect("buffer warm enough");
            let (c, a) = agent.update(&batch);
            ep_critic.push(c);
            ep_actor.push(a);
        }

        if ep_steps == cfg.episode_len {
            logs.push(EpisodeLog {
                episode,
                steps: ep_steps,
                mean_reward: ep_reward / ep_steps as f64,
                mean_queue: ep_queue / ep_steps as f64,
                exploration: noise.sigma(),
                mean_loss: mean(&ep_critic),
                actor_objective: Some(mean(&ep_actor)),
            });
            episode += 1;
            ep_reward = 0.0;
            ep_queue = 0.0;
            ep_critic.clear();
            ep_actor.clear();
            ep_steps = 0;
            env.reset();
            noise.reset();
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
