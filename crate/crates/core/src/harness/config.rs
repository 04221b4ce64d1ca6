//! Run configuration: one TOML file with `[episode]`, `[policy]`,
//! `[learner]`, `[env]` and `[rewards]` sections.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::er::ErConfig;
use crate::error::{Error, Result};
use crate::learner::{EarlyStop, EstimatorKind, StepSchedule, TrainConfig};
use crate::offense::{KeeperConfig, OffenseConfig, PolicySetup, RewardTable, Scenario, ShotModel};
use crate::smdp::{EpisodeConfig, RewardMode};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    pub horizon: u32,
    pub beta: f64,
    /// Discount in probabilistic-goal mode.
    pub gamma: f64,
    /// Discount used by `er-train`.
    pub er_gamma: f64,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        EpisodeSection {
            horizon: 150,
            beta: 1.0,
            gamma: 1.0,
            er_gamma: crate::er::ER_GAMMA,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSection {
    pub trials: u32,
    pub episodes: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub a0: f64,
    pub p_a: f64,
    pub b0: f64,
    pub p_b: f64,
    pub alpha_bounds: (f64, f64),
    pub omega_bounds: (f64, f64),
    pub estimator: EstimatorKind,
    pub critic_step: f64,
    /// Evaluation episodes per trial after training.
    pub eval_episodes: usize,
    pub early_stop: Option<EarlyStop>,
}

impl Default for LearnerSection {
    fn default() -> Self {
        LearnerSection {
            trials: 3,
            episodes: 20_000,
            batch_size: 10,
            seed: 1,
            a0: 2.0,
            p_a: 0.6,
            b0: 50.0,
            p_b: 0.6,
            alpha_bounds: (-50.0, 50.0),
            omega_bounds: (-300.0, 300.0),
            estimator: EstimatorKind::ActorCritic,
            critic_step: 0.05,
            eval_episodes: 100,
            early_stop: Some(EarlyStop::default()),
        }
    }
}

/// Field, shot and keeper parameters; the reward table has its own section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub scenario: Scenario,
    pub striker_speed: f64,
    pub dribble_max: f64,
    pub dribble_rap_per_step: f64,
    pub control_radius: f64,
    pub start_x: f64,
    pub start_y: f64,
    pub start_jitter: f64,
    pub shot: ShotModel,
    pub keeper: KeeperConfig,
}

impl Default for EnvSection {
    fn default() -> Self {
        let c = OffenseConfig::default();
        EnvSection {
            scenario: c.scenario,
            striker_speed: c.striker_speed,
            dribble_max: c.dribble_max,
            dribble_rap_per_step: c.dribble_rap_per_step,
            control_radius: c.control_radius,
            start_x: c.start_x,
            start_y: c.start_y,
            start_jitter: c.start_jitter,
            shot: c.shot,
            keeper: c.keeper,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub episode: EpisodeSection,
    pub policy: PolicySetup,
    pub learner: LearnerSection,
    pub env: EnvSection,
    pub rewards: RewardTable,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            episode: EpisodeSection::default(),
            policy: PolicySetup::default(),
            learner: LearnerSection::default(),
            env: EnvSection::default(),
            rewards: RewardTable::default(),
        }
    }
}

impl RunConfig {
    /// Read and validate a config file. A missing or unreadable file is an
    /// I/O error; anything wrong with its contents is a config error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg = Self::from_toml(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text)?;
        let found = value.get("schema_version").and_then(|v| v.as_integer()).unwrap_or(0);
        if found != CONFIG_SCHEMA_VERSION as i64 {
            return Err(Error::Schema {
                found: found.max(0) as u32,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        Ok(value.try_into()?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical TOML serialisation.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn offense(&self, scenario: Scenario) -> OffenseConfig {
        let e = &self.env;
        OffenseConfig {
            scenario,
            striker_speed: e.striker_speed,
            dribble_max: e.dribble_max,
            dribble_rap_per_step: e.dribble_rap_per_step,
            control_radius: e.control_radius,
            start_x: e.start_x,
            start_y: e.start_y,
            start_jitter: e.start_jitter,
            shot: e.shot.clone(),
            keeper: e.keeper.clone(),
            rewards: self.rewards.clone(),
        }
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        let l = &self.learner;
        StepSchedule::new(l.a0, l.p_a, l.b0, l.p_b)
    }

    /// Training configuration for one trial in the given mode.
    pub fn train_config(&self, mode: RewardMode, seed: u64) -> Result<TrainConfig> {
        let l = &self.learner;
        let ep = &self.episode;
        let base = TrainConfig {
            episodes: l.episodes,
            batch_size: l.batch_size,
            episode: EpisodeConfig::new(ep.horizon, ep.beta, ep.gamma, RewardMode::ProbabilisticGoal)?,
            schedule: self.schedule()?,
            alpha_bounds: l.alpha_bounds,
            omega_bounds: l.omega_bounds,
            estimator: l.estimator,
            critic_step: l.critic_step,
            early_stop: l.early_stop,
            seed,
        };
        match mode {
            RewardMode::ProbabilisticGoal => {
                base.validate()?;
                Ok(base)
            }
            RewardMode::ExpectedReturn => Ok(ErConfig::with_gamma(base, ep.er_gamma)?.config().clone()),
        }
    }

    /// Every problem with the configuration, one message per item.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ep = &self.episode;
        if ep.horizon == 0 {
            out.push("episode.horizon must be at least 1".into());
        }
        if !ep.beta.is_finite() {
            out.push("episode.beta must be finite".into());
        }
        for (name, g) in [("episode.gamma", ep.gamma), ("episode.er_gamma", ep.er_gamma)] {
            if !(0.0..=1.0).contains(&g) {
                out.push(format!("{name} = {g} outside [0, 1]"));
            }
        }
        out.extend(self.policy.violations());
        let l = &self.learner;
        if let Err(e) = self.schedule() {
            out.push(format!("learner schedule: {e}"));
        }
        if l.trials == 0 {
            out.push("learner.trials must be at least 1".into());
        }
        if l.episodes == 0 {
            out.push("learner.episodes must be at least 1".into());
        }
        if l.batch_size == 0 {
            out.push("learner.batch_size must be at least 1".into());
        }
        if l.eval_episodes == 0 {
            out.push("learner.eval_episodes must be at least 1".into());
        }
        for (name, (lo, hi)) in [("learner.alpha_bounds", l.alpha_bounds), ("learner.omega_bounds", l.omega_bounds)] {
            if !(lo < hi) {
                out.push(format!("{name} needs lower < upper, got [{lo}, {hi}]"));
            }
        }
        if !(l.critic_step >= 0.0 && l.critic_step.is_finite()) {
            out.push(format!("learner.critic_step = {} must be finite and nonnegative", l.critic_step));
        }
        if l.early_stop.is_some_and(|es| es.window == 0) {
            out.push("learner.early_stop.window must be positive".into());
        }
        out.extend(self.offense(self.env.scenario).violations());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let items = self.violations();
        if items.is_empty() {
            return Ok(());
        }
        let mut report = format!("{} problem(s) in configuration:", items.len());
        for item in &items {
            report.push_str("\n  - ");
            report.push_str(item);
        }
        Err(Error::Config(report))
    }
}
