//! Declarative experiment configuration (TOML) with dotted-path overrides.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{DdpgConfig, DqnConfig, NoiseKind, TargetSync};
use crate::baselines::{FixedCycleSpec, ThresholdSpec};
use crate::env::{ArrivalKind, ArrivalMode, ArrivalModel, GridTopology, PassingRates};

use super::HarnessError;

/// Which network the experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Single,
    /// `avenue-N`: one avenue crossing N streets.
    Avenue(usize),
    /// `grid-RxC`: R avenues crossing C streets.
    Grid(usize, usize),
}

impl Scenario {
    pub fn topology(&self) -> Option<GridTopology> {
        match *self {
            Scenario::Single => None,
            Scenario::Avenue(n) => Some(GridTopology::new(1, n).expect("validated")),
            Scenario::Grid(r, c) => Some(GridTopology::new(r, c).expect("validated")),
        }
    }

    pub fn intersections(&self) -> usize {
        match *self {
            Scenario::Single => 1,
            Scenario::Avenue(n) => n,
            Scenario::Grid(r, c) => r * c,
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "single" {
            return Ok(Scenario::Single);
        }
        if let Some(rest) = s.strip_prefix("avenue-") {
            let n: usize = rest.parse().map_err(|_| format!("bad avenue size {rest:?}"))?;
            if n < 2 {
                return Err("avenue needs at least 2 intersections".into());
            }
            return Ok(Scenario::Avenue(n));
        }
        if let Some(rest) = s.strip_prefix("grid-") {
            let (r, c) = rest
                .split_once('x')
                .ok_or_else(|| format!("grid spec {rest:?} is not RxC"))?;
            let rows: usize = r.parse().map_err(|_| format!("bad grid rows {r:?}"))?;
            let cols: usize = c.parse().map_err(|_| format!("bad grid cols {c:?}"))?;
            if rows < 1 || cols < 1 || rows * cols < 2 {
                return Err("grid needs at least 2 intersections".into());
            }
            return Ok(Scenario::Grid(rows, cols));
        }
        Err(format!(
            "unknown scenario {s:?} (expected single, avenue-N, or grid-RxC)"
        ))
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Scenario::Single => write!(f, "single"),
            Scenario::Avenue(n) => write!(f, "avenue-{n}"),
            Scenario::Grid(r, c) => write!(f, "grid-{r}x{c}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub scenario: String,
    pub seed: u64,
    /// Steps per episode (the evaluation horizon T).
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
}

fn default_horizon() -> usize {
    150
}

fn default_episodes() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalsSection {
    #[serde(default = "default_arrival_kind")]
    pub kind: String,
    #[serde(default = "default_p_avenue")]
    pub avenue: f64,
    #[serde(default = "default_p_cross")]
    pub cross: f64,
    /// `boundary-chained` or `per-intersection-external` (grid only).
    #[serde(default = "default_mode")]
    pub mode: String,
}

fn default_arrival_kind() -> String {
    "bernoulli".into()
}

fn default_p_avenue() -> f64 {
    0.25
}

fn default_p_cross() -> f64 {
    0.25
}

fn default_mode() -> String {
    "boundary-chained".into()
}

impl Default for ArrivalsSection {
    fn default() -> Self {
        ArrivalsSection {
            kind: default_arrival_kind(),
            avenue: default_p_avenue(),
            cross: default_p_cross(),
            mode: default_mode(),
        }
    }
}

impl ArrivalsSection {
    pub fn build(&self) -> Result<ArrivalModel, HarnessError> {
        let mode = match self.mode.as_str() {
            "boundary-chained" => ArrivalMode::BoundaryChained,
            "per-intersection-external" => ArrivalMode::PerIntersectionExternal,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown arrival mode {other:?}"
                )))
            }
        };
        let kind = match self.kind.as_str() {
            "bernoulli" => ArrivalKind::Bernoulli {
                avenue: self.avenue,
                cross: self.cross,
            },
            "bounded-uniform" => ArrivalKind::BoundedUniform {
                avenue_cap: self.avenue as u64,
                cross_cap: self.cross as u64,
            },
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown arrival kind {other:?}"
                )))
            }
        };
        let model = ArrivalModel { kind, mode };
        model
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassingSection {
    pub avenue: u64,
    pub cross: u64,
}

impl Default for PassingSection {
    fn default() -> Self {
        PassingSection {
            avenue: 1,
            cross: 1,
        }
    }
}

impl PassingSection {
    pub fn build(&self) -> Result<PassingRates, HarnessError> {
        PassingRates::new(self.avenue, self.cross)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    /// fixed-cycle | threshold | greenwave-aggregate | greenwave-scheduled |
    /// random | mdp-optimal | dqn | ddpg
    pub kind: String,
    #[serde(default)]
    pub green_slots: Option<u32>,
    #[serde(default)]
    pub yellow_slots: Option<u32>,
    #[serde(default)]
    pub red_slots: Option<u32>,
    #[serde(default)]
    pub orange_slots: Option<u32>,
    /// Per-node clock offsets for a staggered fixed cycle.
    #[serde(default)]
    pub offsets: Option<Vec<u32>>,
    #[serde(default)]
    pub tau_green: Option<u64>,
    #[serde(default)]
    pub tau_red: Option<u64>,
    /// Aggregate greenwave critical value.
    #[serde(default)]
    pub critical: Option<u64>,
    /// Checkpoint path for dqn/ddpg evaluation.
    #[serde(default)]
    pub checkpoint: Option<String>,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: "fixed-cycle".into(),
            green_slots: None,
            yellow_slots: None,
            red_slots: None,
            orange_slots: None,
            offsets: None,
            tau_green: None,
            tau_red: None,
            critical: None,
            checkpoint: None,
        }
    }
}

impl PolicySection {
    pub fn fixed_cycle_spec(&self) -> Result<FixedCycleSpec, HarnessError> {
        let d = FixedCycleSpec::default();
        let spec = FixedCycleSpec {
            green_slots: self.green_slots.unwrap_or(d.green_slots),
            yellow_slots: self.yellow_slots.unwrap_or(d.yellow_slots),
            red_slots: self.red_slots.unwrap_or(d.red_slots),
            orange_slots: self.orange_slots.unwrap_or(d.orange_slots),
        };
        spec.validate().map_err(HarnessError::Config)?;
        Ok(spec)
    }

    pub fn threshold_spec(&self) -> ThresholdSpec {
        let d = ThresholdSpec::default();
        ThresholdSpec {
            tau_green: self.tau_green.unwrap_or(d.tau_green),
            tau_red: self.tau_red.unwrap_or(d.tau_red),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnSection {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub lr: f64,
    pub lr_end: f64,
    pub batch: usize,
    pub capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: usize,
    /// 0 = snapshot before every update, otherwise copy every n updates.
    pub target_sync_every: u64,
    pub queue_scale: f64,
    pub onehot_queues: u64,
    pub reward_scale: f64,
    pub warmup: usize,
    pub update_every: usize,
    pub steps: usize,
}

impl Default for DqnSection {
    fn default() -> Self {
        let d = DqnConfig::default();
        DqnSection {
            hidden: d.hidden,
            gamma: d.gamma,
            lr: d.lr,
            lr_end: d.lr_end,
            batch: d.batch,
            capacity: d.capacity,
            eps_start: d.eps_start,
            eps_end: d.eps_end,
            eps_decay_steps: d.eps_decay_steps,
            target_sync_every: 0,
            queue_scale: d.queue_scale,
            onehot_queues: d.onehot_queues,
            reward_scale: d.reward_scale,
            warmup: d.warmup,
            update_every: d.update_every,
            steps: d.steps,
        }
    }
}

impl DqnSection {
    pub fn build(&self, episode_len: usize) -> DqnConfig {
        DqnConfig {
            hidden: self.hidden.clone(),
            gamma: self.gamma,
            lr: self.lr,
            lr_end: self.lr_end,
            batch: self.batch,
            capacity: self.capacity,
            eps_start: self.eps_start,
            eps_end: self.eps_end,
            eps_decay_steps: self.eps_decay_steps,
            target_sync: if self.target_sync_every == 0 {
                TargetSync::PerUpdate
            } else {
                TargetSync::Every(self.target_sync_every)
            },
            queue_scale: self.queue_scale,
            onehot_queues: self.onehot_queues,
            reward_scale: self.reward_scale,
            warmup: self.warmup,
            update_every: self.update_every,
            steps: self.steps,
            episode_len,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdpgSection {
    pub hidden_actor: Vec<usize>,
    pub hidden_critic: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch: usize,
    pub capacity: usize,
    pub alpha: f64,
    /// `ou` or `gaussian`.
    pub noise: String,
    pub noise_sigma: f64,
    pub noise_theta: f64,
    pub noise_dt: f64,
    pub queue_scale: f64,
    pub reward_scale: f64,
    pub warmup: usize,
    pub update_every: usize,
    pub steps: usize,
}

impl Default for DdpgSection {
    fn default() -> Self {
        let d = DdpgConfig::default();
        DdpgSection {
            hidden_actor: d.hidden_actor,
            hidden_critic: d.hidden_critic,
            gamma: d.gamma,
            tau: d.tau,
            lr_actor: d.lr_actor,
            lr_critic: d.lr_critic,
            batch: d.batch,
            capacity: d.capacity,
            alpha: d.alpha,
            noise: "ou".into(),
            noise_sigma: 0.3,
            noise_theta: 0.15,
            noise_dt: 1.0,
            queue_scale: d.queue_scale,
            reward_scale: d.reward_scale,
            warmup: d.warmup,
            update_every: d.update_every,
            steps: d.steps,
        }
    }
}

impl DdpgSection {
    pub fn build(&self, episode_len: usize) -> Result<DdpgConfig, HarnessError> {
        let noise = match self.noise.as_str() {
            "ou" => NoiseKind::OrnsteinUhlenbeck {
                theta: self.noise_theta,
                sigma: self.noise_sigma,
                dt: self.noise_dt,
            },
            "gaussian" => NoiseKind::Gaussian {
                sigma: self.noise_sigma,
            },
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown noise kind {other:?}"
                )))
            }
        };
        Ok(DdpgConfig {
            hidden_actor: self.hidden_actor.clone(),
            hidden_critic: self.hidden_critic.clone(),
            gamma: self.gamma,
            tau: self.tau,
            lr_actor: self.lr_actor,
            lr_critic: self.lr_critic,
            batch: self.batch,
            capacity: self.capacity,
            alpha: self.alpha,
            noise,
            queue_scale: self.queue_scale,
            reward_scale: self.reward_scale,
            warmup: self.warmup,
            update_every: self.update_every,
            steps: self.steps,
            episode_len,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdpSection {
    pub x_max: u64,
    pub gamma: f64,
    pub vi_tol: f64,
}

impl Default for MdpSection {
    fn default() -> Self {
        MdpSection {
            x_max: 30,
            gamma: 0.99,
            vi_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidSection {
    pub lambda0: f64,
    pub lambda1: f64,
    pub nodes: usize,
    pub yellow: f64,
    pub orange: f64,
    pub deltas: Vec<f64>,
    /// Simulation length in control cycles per delta.
    pub cycles: f64,
}

impl Default for FluidSection {
    fn default() -> Self {
        FluidSection {
            lambda0: 0.25,
            lambda1: 0.25,
            nodes: 5,
            yellow: 1.0,
            orange: 1.0,
            deltas: vec![0.0, 0.1, 0.5],
            cycles: 80.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub arrivals: ArrivalsSection,
    #[serde(default)]
    pub passing: PassingSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub dqn: DqnSection,
    #[serde(default)]
    pub ddpg: DdpgSection,
    #[serde(default)]
    pub mdp: MdpSection,
    #[serde(default)]
    pub fluid: FluidSection,
}

impl ExperimentConfig {
    pub fn scenario(&self) -> Result<Scenario, HarnessError> {
        self.experiment
            .scenario
            .parse()
            .map_err(HarnessError::Config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scenario()?;
        self.arrivals.build()?;
        self.passing.build()?;
        if self.experiment.horizon < 1 {
            return Err(HarnessError::Config("horizon must be >= 1".into()));
        }
        if self.experiment.episodes < 1 {
            return Err(HarnessError::Config("episodes must be >= 1".into()));
        }
        Ok(())
    }

    /// Parses TOML text, applying `key=value` overrides on dotted paths
    /// before deserialization.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut value: toml::Value = text
            .parse()
            .map_err(|e| HarnessError::Config(format!("config parse: {e}")))?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e| HarnessError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(&path).map_err(|e| {
            HarnessError::Config(format!("cannot read {:?}: {e}", path.as_ref()))
        })?;
        Self::from_toml(&text, overrides)
    }
}

/// Applies one `a.b.c=value` override; the value parses as TOML when
/// possible and falls back to a plain string.
fn apply_override(root: &mut toml::Value, item: &str) -> Result<(), HarnessError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override {item:?} is not key=value")))?;
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Value>() {
        Ok(toml::Value::Table(mut t)) => t.remove("v").expect("key v present"),
        _ => toml::Value::String(raw.to_string()),
    };
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("override path {path:?} hits a non-table")))?;
        if i + 1 == segments.len() {
            table.insert(seg.to_string(), parsed);
            return Ok(());
        }
        cursor = table
            .entry(seg.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    unreachable!("override path is non-empty")
}
