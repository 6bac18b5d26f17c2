//! Experiment orchestration: building controllers from configuration,
//! seeded evaluation runs, paired comparisons, and training entry points.

use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{train_ddpg, train_dqn, DdpgAgent, DqnAgent, EpisodeLog};
use crate::baselines::{
    FixedCyclePolicy, GreenwaveMode, GreenwavePolicy, GridFixedCyclePolicy, GridPolicy,
    RandomGridPolicy, SinglePolicy, ThresholdPolicy,
};
use crate::env::{
    ArrivalKind, GridEnv, GridState, SingleEnv, SingleState, Snapshot, Trajectory,
};
use crate::mdp::{
    build_transitions, extract_threshold_curve, policy_iteration, PolicyTable, SolveOptions,
    SolveResult, ThresholdCurve, TransitionModel, TruncatedSpace,
};
use crate::nn::Mlp;

use super::config::{ExperimentConfig, Scenario};
use super::metrics::{detect_greenwave, discounted_cost_of, synchrony_index, GreenwaveReport};
use super::rng::{eval_stream, stream, STREAM_AGENT_INIT, STREAM_ENV, STREAM_EXPLORE, STREAM_POLICY};
use super::HarnessError;

pub const DETECT_WINDOW: usize = 50;
pub const DETECT_THRESHOLD: f64 = 0.9;
pub const DETECT_MAX_LAG: usize = 10;

/// Aggregated evaluation metrics; serialized as `metrics.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub episodes: usize,
    pub horizon: usize,
    pub gamma: f64,
    /// Time-averaged total queued vehicles.
    pub avg_queue_len: f64,
    /// Mean discounted congestion cost per episode.
    pub discounted_cost: f64,
    pub mean_episode_reward: f64,
    /// Vehicles leaving the network per slot.
    pub throughput: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synchrony_index: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greenwave: Option<GreenwaveReport>,
    /// Per-episode discounted costs (paired across policies by seed).
    pub episode_costs: Vec<f64>,
}

/// A single-intersection controller assembled from configuration.
pub enum SingleController {
    Fixed(FixedCyclePolicy),
    Threshold(ThresholdPolicy),
    Mdp {
        space: TruncatedSpace,
        policy: PolicyTable,
    },
    Dqn(Box<DqnAgent>),
    Random(ChaCha12Rng),
}

impl SingleController {
    pub fn act(&mut self, state: &SingleState) -> u8 {
        match self {
            SingleController::Fixed(p) => p.act(state),
            SingleController::Threshold(p) => p.act(state),
            SingleController::Mdp { space, policy } => {
                let clamped = SingleState::new(
                    state.x1.min(space.x_max()),
                    state.x2.min(space.x_max()),
                    state.phase,
                );
                policy.actions[space.index(&clamped)]
            }
            SingleController::Dqn(agent) => {
                let enc = agent.encode(state);
                agent.greedy(&enc)
            }
            SingleController::Random(rng) => rand::Rng::gen_range(rng, 0..=1),
        }
    }

    pub fn reset(&mut self) {
        match self {
            SingleController::Fixed(p) => p.reset(),
            SingleController::Threshold(p) => p.reset(),
            _ => {}
        }
    }
}

/// A grid controller assembled from configuration.
pub enum GridController {
    Fixed(GridFixedCyclePolicy),
    Greenwave(GreenwavePolicy),
    Random(RandomGridPolicy),
    Ddpg(Box<DdpgAgent>),
}

impl GridController {
    pub fn act(&mut self, state: &GridState) -> crate::env::Action {
        match self {
            GridController::Fixed(p) => p.act(state),
            GridController::Greenwave(p) => p.act(state),
            GridController::Random(p) => p.act(state),
            GridController::Ddpg(agent) => {
                let enc = agent.encode(state);
                agent.select(&enc, None).1
            }
        }
    }

    pub fn reset(&mut self) {
        match self {
            GridController::Fixed(p) => p.reset(),
            GridController::Greenwave(p) => p.reset(),
            _ => {}
        }
    }
}

fn bernoulli_probs(cfg: &ExperimentConfig) -> Result<(f64, f64), HarnessError> {
    match cfg.arrivals.build()?.kind {
        ArrivalKind::Bernoulli { avenue, cross } => Ok((avenue, cross)),
        _ => Err(HarnessError::Config(
            "this policy requires Bernoulli arrivals".into(),
        )),
    }
}

/// Solves the truncated control problem configured in `[mdp]`.
pub fn solve_mdp_experiment(
    cfg: &ExperimentConfig,
) -> Result<(TransitionModel, SolveResult, ThresholdCurve), HarnessError> {
    let (p1, p2) = bernoulli_probs(cfg)?;
    let rates = cfg.passing.build()?;
    let space = TruncatedSpace::new(cfg.mdp.x_max);
    let model = build_transitions(space, p1, p2, rates)?;
    let solved = policy_iteration(&model, cfg.mdp.gamma, SolveOptions::default())?;
    let curve = extract_threshold_curve(&space, &solved.policy, 0);
    Ok((model, solved, curve))
}

pub fn build_single_controller(cfg: &ExperimentConfig) -> Result<SingleController, HarnessError> {
    match cfg.policy.kind.as_str() {
        "fixed-cycle" => Ok(SingleController::Fixed(FixedCyclePolicy::new(
            cfg.policy.fixed_cycle_spec()?,
        ))),
        "threshold" => Ok(SingleController::Threshold(ThresholdPolicy::new(
            cfg.policy.threshold_spec(),
        ))),
        "mdp-optimal" => {
            let (_, solved, _) = solve_mdp_experiment(cfg)?;
            Ok(SingleController::Mdp {
                space: TruncatedSpace::new(cfg.mdp.x_max),
                policy: solved.policy,
            })
        }
        "dqn" => {
            let path = cfg.policy.checkpoint.as_ref().ok_or_else(|| {
                HarnessError::Config("dqn policy needs policy.checkpoint".into())
            })?;
            let net = Mlp::load_from_path(path)
                .map_err(|e| HarnessError::Config(format!("checkpoint {path:?}: {e}")))?;
            let agent = DqnAgent::from_network(cfg.dqn.build(cfg.experiment.horizon), net)
                .map_err(|e| HarnessError::Config(format!("checkpoint incompatible: {e}")))?;
            Ok(SingleController::Dqn(Box::new(agent)))
        }
        "random" => Ok(SingleController::Random(stream(
            cfg.experiment.seed,
            STREAM_POLICY,
        ))),
        other => Err(HarnessError::Config(format!(
            "policy {other:?} is not a single-intersection policy"
        ))),
    }
}

pub fn build_grid_controller(
    cfg: &ExperimentConfig,
    intersections: usize,
) -> Result<GridController, HarnessError> {
    match cfg.policy.kind.as_str() {
        "fixed-cycle" => {
            let spec = cfg.policy.fixed_cycle_spec()?;
            let ctrl = match &cfg.policy.offsets {
                Some(offsets) => {
                    if offsets.len() != intersections {
                        return Err(HarnessError::Config(format!(
                            "{} offsets for {} intersections",
                            offsets.len(),
                            intersections
                        )));
                    }
                    GridFixedCyclePolicy::staggered(spec, offsets.clone())
                }
                None => GridFixedCyclePolicy::synchronized(spec, intersections),
            };
            Ok(GridController::Fixed(ctrl))
        }
        "greenwave-aggregate" => Ok(GridController::Greenwave(GreenwavePolicy::new(
            GreenwaveMode::Aggregate {
                critical: cfg.policy.critical.unwrap_or(5),
            },
        ))),
        "greenwave-scheduled" => Ok(GridController::Greenwave(GreenwavePolicy::new(
            GreenwaveMode::Scheduled {
                spec: cfg.policy.fixed_cycle_spec()?,
            },
        ))),
        "random" => Ok(GridController::Random(RandomGridPolicy::new(stream(
            cfg.experiment.seed,
            STREAM_POLICY,
        )))),
        "ddpg" => {
            let path = cfg.policy.checkpoint.as_ref().ok_or_else(|| {
                HarnessError::Config("ddpg policy needs policy.checkpoint".into())
            })?;
            let actor = Mlp::load_from_path(path)
                .map_err(|e| HarnessError::Config(format!("checkpoint {path:?}: {e}")))?;
            let agent = DdpgAgent::from_actor(
                cfg.ddpg.build(cfg.experiment.horizon)?,
                intersections,
                actor,
            )
            .map_err(|e| HarnessError::Config(format!("checkpoint incompatible: {e}")))?;
            Ok(GridController::Ddpg(Box::new(agent)))
        }
        other => Err(HarnessError::Config(format!(
            "policy {other:?} is not a grid policy"
        ))),
    }
}

/// Evaluates a controller over the configured episodes with per-episode
/// arrival streams; returns the aggregated metrics and the last episode's
/// trajectory.
pub fn run_experiment(
    cfg: &ExperimentConfig,
) -> Result<(MetricsReport, Trajectory), HarnessError> {
    cfg.validate()?;
    match cfg.scenario()? {
        Scenario::Single => {
            let mut controller = build_single_controller(cfg)?;
            eval_single(cfg, &mut controller)
        }
        scenario => {
            let topo = scenario.topology().expect("grid scenario");
            let mut controller = build_grid_controller(cfg, topo.intersections())?;
            eval_grid(cfg, &mut controller)
        }
    }
}

pub fn eval_single(
    cfg: &ExperimentConfig,
    controller: &mut SingleController,
) -> Result<(MetricsReport, Trajectory), HarnessError> {
    let arrivals = cfg.arrivals.build()?;
    let rates = cfg.passing.build()?;
    let horizon = cfg.experiment.horizon;
    let gamma = cfg.mdp.gamma;

    let mut episode_costs = Vec::new();
    let mut queue_sum = 0.0;
    let mut reward_sum = 0.0;
    let mut departed = 0u64;
    let mut last_traj = None;
    for episode in 0..cfg.experiment.episodes {
        let rng = eval_stream(cfg.experiment.seed, episode);
        let mut env = SingleEnv::new(arrivals, rates, rng);
        controller.reset();
        let mut traj = Trajectory::new(Snapshot::from_single(&env.state()));
        for _ in 0..horizon {
            let state = env.state();
            queue_sum += (state.x1 + state.x2) as f64;
            let bit = controller.act(&state);
            let result = env.step(bit);
            departed += result.departures.0 + result.departures.1;
            reward_sum += result.reward;
            traj.push(vec![bit], result.reward, Snapshot::from_single(&result.next));
        }
        let final_state = env.state();
        queue_sum += (final_state.x1 + final_state.x2) as f64;
        episode_costs.push(discounted_cost_of(&traj, gamma, horizon));
        last_traj = Some(traj);
    }
    let episodes = cfg.experiment.episodes;
    let slots = (episodes * (horizon + 1)) as f64;
    let metrics = MetricsReport {
        scenario: cfg.experiment.scenario.clone(),
        policy: cfg.policy.kind.clone(),
        seed: cfg.experiment.seed,
        episodes,
        horizon,
        gamma,
        avg_queue_len: queue_sum / slots,
        discounted_cost: mean(&episode_costs),
        mean_episode_reward: reward_sum / (episodes * horizon) as f64,
        throughput: departed as f64 / (episodes * horizon) as f64,
        synchrony_index: None,
        greenwave: None,
        episode_costs,
    };
    Ok((metrics, last_traj.expect("episodes >= 1")))
}

pub fn eval_grid(
    cfg: &ExperimentConfig,
    controller: &mut GridController,
) -> Result<(MetricsReport, Trajectory), HarnessError> {
    let scenario = cfg.scenario()?;
    let topo = scenario
        .topology()
        .ok_or_else(|| HarnessError::Config("grid evaluation needs a grid scenario".into()))?;
    let arrivals = cfg.arrivals.build()?;
    let rates = cfg.passing.build()?;
    let horizon = cfg.experiment.horizon;
    let gamma = cfg.mdp.gamma;

    let mut episode_costs = Vec::new();
    let mut queue_sum = 0.0;
    let mut reward_sum = 0.0;
    let mut exited = 0u64;
    let mut last_traj = None;
    for episode in 0..cfg.experiment.episodes {
        let rng = eval_stream(cfg.experiment.seed, episode);
        let mut env = GridEnv::new(topo, arrivals, rates, rng);
        controller.reset();
        let mut traj = Trajectory::new(Snapshot::from_grid(env.state()));
        for _ in 0..horizon {
            queue_sum += env.state().total_queued() as f64;
            let action = controller.act(env.state());
            let result = env.step(&action)?;
            exited += result.exited;
            reward_sum += result.reward;
            traj.push(
                action.bits().to_vec(),
                result.reward,
                Snapshot::from_grid(&result.next),
            );
        }
        queue_sum += env.state().total_queued() as f64;
        episode_costs.push(discounted_cost_of(&traj, gamma, horizon));
        last_traj = Some(traj);
    }
    let episodes = cfg.experiment.episodes;
    let traj = last_traj.expect("episodes >= 1");
    let window = DETECT_WINDOW.min(horizon + 1);
    let greenwave = detect_greenwave(&traj, topo.cross_streets, window, DETECT_THRESHOLD, DETECT_MAX_LAG);
    let metrics = MetricsReport {
        scenario: cfg.experiment.scenario.clone(),
        policy: cfg.policy.kind.clone(),
        seed: cfg.experiment.seed,
        episodes,
        horizon,
        gamma,
        avg_queue_len: queue_sum / (episodes * (horizon + 1)) as f64,
        discounted_cost: mean(&episode_costs),
        mean_episode_reward: reward_sum / (episodes * horizon) as f64,
        throughput: exited as f64 / (episodes * horizon) as f64,
        synchrony_index: Some(synchrony_index(&traj)),
        greenwave: Some(greenwave),
        episode_costs,
    };
    Ok((metrics, traj))
}

/// Paired comparison: both configurations must share scenario, seed,
/// horizon and arrivals so the per-episode arrival streams coincide.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub a: MetricsReport,
    pub b: MetricsReport,
    /// Mean over episodes of (cost_a - cost_b); positive favors A (costs
    /// are negative).
    pub paired_cost_delta: f64,
    /// Episodes where A's discounted cost is at least B's.
    pub episodes_a_not_worse: usize,
}

pub fn compare(
    cfg_a: &ExperimentConfig,
    cfg_b: &ExperimentConfig,
) -> Result<CompareReport, HarnessError> {
    if cfg_a.experiment.scenario != cfg_b.experiment.scenario
        || cfg_a.experiment.seed != cfg_b.experiment.seed
        || cfg_a.experiment.horizon != cfg_b.experiment.horizon
        || cfg_a.experiment.episodes != cfg_b.experiment.episodes
    {
        return Err(HarnessError::Config(
            "paired comparison needs matching experiment sections".into(),
        ));
    }
    let (a, _) = run_experiment(cfg_a)?;
    let (b, _) = run_experiment(cfg_b)?;
    let deltas: Vec<f64> = a
        .episode_costs
        .iter()
        .zip(&b.episode_costs)
        .map(|(x, y)| x - y)
        .collect();
    let episodes_a_not_worse = deltas.iter().filter(|d| **d >= 0.0).count();
    Ok(CompareReport {
        paired_cost_delta: mean(&deltas),
        episodes_a_not_worse,
        a,
        b,
    })
}

/// Trains DQN per `[dqn]` and evaluates the greedy policy.
pub fn train_dqn_experiment(
    cfg: &ExperimentConfig,
) -> Result<(DqnAgent, Vec<EpisodeLog>, MetricsReport, Trajectory), HarnessError> {
    cfg.validate()?;
    if cfg.scenario()? != Scenario::Single {
        return Err(HarnessError::Config("train-dqn runs on scenario single".into()));
    }
    let arrivals = cfg.arrivals.build()?;
    let rates = cfg.passing.build()?;
    let seed = cfg.experiment.seed;
    let mut env = SingleEnv::new(arrivals, rates, stream(seed, STREAM_ENV));
    let mut init = stream(seed, STREAM_AGENT_INIT);
    let mut explore = stream(seed, STREAM_EXPLORE);
    let (agent, logs) = train_dqn(
        &mut env,
        cfg.dqn.build(cfg.experiment.horizon),
        &mut init,
        &mut explore,
    );
    let mut controller = SingleController::Dqn(Box::new(agent));
    let (metrics, traj) = eval_single(cfg, &mut controller)?;
    let agent = match controller {
        SingleController::Dqn(a) => *a,
        _ => unreachable!(),
    };
    Ok((agent, logs, metrics, traj))
}

/// Trains DDPG per `[ddpg]` and evaluates the noise-free policy.
pub fn train_ddpg_experiment(
    cfg: &ExperimentConfig,
) -> Result<(DdpgAgent, Vec<EpisodeLog>, MetricsReport, Trajectory), HarnessError> {
    cfg.validate()?;
    let topo = cfg
        .scenario()?
        .topology()
        .ok_or_else(|| HarnessError::Config("train-ddpg needs a grid scenario".into()))?;
    let arrivals = cfg.arrivals.build()?;
    let rates = cfg.passing.build()?;
    let seed = cfg.experiment.seed;
    let mut env = GridEnv::new(topo, arrivals, rates, stream(seed, STREAM_ENV));
    let mut init = stream(seed, STREAM_AGENT_INIT);
    let mut explore = stream(seed, STREAM_EXPLORE);
    let (agent, logs) = train_ddpg(
        &mut env,
        cfg.ddpg.build(cfg.experiment.horizon)?,
        &mut init,
        &mut explore,
    );
    let mut controller = GridController::Ddpg(Box::new(agent));
    let (metrics, traj) = eval_grid(cfg, &mut controller)?;
    let agent = match controller {
        GridController::Ddpg(a) => *a,
        _ => unreachable!(),
    };
    Ok((agent, logs, metrics, traj))
}

pub fn write_metrics_json(
    metrics: &impl Serialize,
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let mut bytes = serde_json::to_vec_pretty(metrics)
        .map_err(|e| HarnessError::Runtime(format!("metrics serialization: {e}")))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn write_json_lines(
    logs: &[EpisodeLog],
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    for log in logs {
        let line = serde_json::to_string(log)
            .map_err(|e| HarnessError::Runtime(format!("log serialization: {e}")))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}
