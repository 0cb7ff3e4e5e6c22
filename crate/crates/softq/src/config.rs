//! Run configuration: one versioned TOML document describing the
//! environment, training hyperparameters, and output layout.
//!
//! Unknown keys are rejected; numeric fields are validated before any
//! training starts. Parse → serialize → parse is lossless.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::MultiGoalConfig;
use crate::error::{Result, SoftqError};

pub const CONFIG_VERSION: u32 = 1;

/// Environment selection plus its parameters. Only the multi-goal point
/// mass exists; the `kind` tag keeps the file format open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: String,
    #[serde(default = "default_goals")]
    pub goals: Vec<[f64; 2]>,
    #[serde(default = "default_goal_weight")]
    pub goal_weight: f64,
    #[serde(default = "default_goal_sigma")]
    pub goal_sigma: f64,
    #[serde(default = "default_action_cost")]
    pub action_cost: f64,
    #[serde(default = "default_capture_radius")]
    pub capture_radius: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_reset_jitter")]
    pub reset_jitter_std: f64,
}

fn default_goals() -> Vec<[f64; 2]> {
    vec![[5.0, 0.0], [-5.0, 0.0], [0.0, 5.0], [0.0, -5.0]]
}
fn default_goal_weight() -> f64 {
    10.0
}
fn default_goal_sigma() -> f64 {
    1.0
}
fn default_action_cost() -> f64 {
    0.01
}
fn default_capture_radius() -> f64 {
    0.5
}
fn default_horizon() -> usize {
    20
}
fn default_reset_jitter() -> f64 {
    0.1
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            kind: "multigoal".into(),
            goals: default_goals(),
            goal_weight: default_goal_weight(),
            goal_sigma: default_goal_sigma(),
            action_cost: default_action_cost(),
            capture_radius: default_capture_radius(),
            horizon: default_horizon(),
            reset_jitter_std: default_reset_jitter(),
        }
    }
}

impl EnvConfig {
    pub fn to_multigoal(&self) -> Result<MultiGoalConfig> {
        if self.kind != "multigoal" {
            return Err(SoftqError::Config(format!(
                "unknown environment kind {:?}",
                self.kind
            )));
        }
        let cfg = MultiGoalConfig {
            goals: self.goals.clone(),
            goal_weight: self.goal_weight,
            goal_sigma: self.goal_sigma,
            action_cost: self.action_cost,
            capture_radius: self.capture_radius,
            horizon: self.horizon,
            reset_jitter_std: self.reset_jitter_std,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn state_dim(&self) -> usize {
        2
    }

    pub fn action_dim(&self) -> usize {
        2
    }
}

/// Training-loop hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub n_epochs: usize,
    pub gamma: f64,
    pub alpha: f64,
    #[serde(default = "default_q_lr")]
    pub q_lr: f64,
    #[serde(default = "default_policy_lr")]
    pub policy_lr: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_min_pool")]
    pub min_pool: usize,
    #[serde(default = "default_epoch_length")]
    pub epoch_length: usize,
    #[serde(default = "default_replay_capacity")]
    pub replay_capacity: usize,
    /// SVGD source-particle count M.
    #[serde(default = "default_km")]
    pub m: usize,
    /// SVGD target-particle count K.
    #[serde(default = "default_km")]
    pub k: usize,
    /// Proposal draws per state for the soft-value estimate.
    #[serde(default = "default_k_v")]
    pub k_v: usize,
    /// Hard target-network copy period, in environment steps.
    #[serde(default = "default_target_interval")]
    pub target_update_interval: usize,
    #[serde(default = "default_ou_theta")]
    pub ou_theta: f64,
    #[serde(default = "default_ou_sigma")]
    pub ou_sigma: f64,
    /// Epoch after which the soft-value proposal switches from uniform to
    /// the sampling network.
    #[serde(default = "default_proposal_switch")]
    pub proposal_switch_epoch: usize,
    /// False selects the MAP-mode (DDPG-style) actor update.
    #[serde(default = "default_true")]
    pub svgd_enabled: bool,
}

fn default_q_lr() -> f64 {
    0.001
}
fn default_policy_lr() -> f64 {
    0.0001
}
fn default_batch_size() -> usize {
    64
}
fn default_min_pool() -> usize {
    10_000
}
fn default_epoch_length() -> usize {
    10_000
}
fn default_replay_capacity() -> usize {
    1_000_000
}
fn default_km() -> usize {
    32
}
fn default_k_v() -> usize {
    50
}
fn default_target_interval() -> usize {
    1000
}
fn default_ou_theta() -> f64 {
    0.15
}
fn default_ou_sigma() -> f64 {
    0.3
}
fn default_proposal_switch() -> usize {
    10
}
fn default_true() -> bool {
    true
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.q_lr, "q_lr"),
            (self.policy_lr, "policy_lr"),
            (self.alpha, "alpha"),
        ];
        for (v, name) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SoftqError::Config(format!("{name} must be > 0")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(SoftqError::Config("gamma must lie strictly inside (0,1)".into()));
        }
        if self.ou_theta < 0.0 || self.ou_sigma < 0.0 {
            return Err(SoftqError::Config("ou_theta and ou_sigma must be ≥ 0".into()));
        }
        let at_least_one = [
            (self.batch_size, "batch_size"),
            (self.epoch_length, "epoch_length"),
            (self.replay_capacity, "replay_capacity"),
            (self.m, "m"),
            (self.k, "k"),
            (self.k_v, "k_v"),
            (self.target_update_interval, "target_update_interval"),
            (self.min_pool, "min_pool"),
        ];
        for (v, name) in at_least_one {
            if v < 1 {
                return Err(SoftqError::Config(format!("{name} must be ≥ 1")));
            }
        }
        Ok(())
    }
}

/// Output locations and evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_checkpoint_interval")]
    pub checkpoint_interval_epochs: usize,
    #[serde(default = "default_eval_rollouts")]
    pub eval_rollouts: usize,
    /// When true the metrics CSV carries measured wall-clock seconds; the
    /// default keeps the column at 0 so identical runs produce byte-identical
    /// files. Timing always goes to the progress log either way.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_checkpoint_interval() -> usize {
    10
}
fn default_eval_rollouts() -> usize {
    100
}

/// The whole run document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| SoftqError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SoftqError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(SoftqError::Config(format!(
                "unsupported config version {} (this build reads {CONFIG_VERSION})",
                self.version
            )));
        }
        self.env.to_multigoal()?;
        self.train.validate()?;
        if self.checkpoint_interval_epochs() < 1 {
            return Err(SoftqError::Config(
                "checkpoint_interval_epochs must be ≥ 1".into(),
            ));
        }
        Ok(())
    }

    pub fn checkpoint_interval_epochs(&self) -> usize {
        self.output.checkpoint_interval_epochs
    }
}
