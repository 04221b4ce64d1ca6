//! Expected-return comparison agent.
//!
//! Same policy class, estimators and update as the probabilistic-goal
//! learner; only the reward stream differs: every record carries its raw
//! shaped reward and the return is discounted.

use crate::error::{Error, Result};
use crate::learner::{train, TrainConfig, TrainOutcome};
use crate::policy::TwoTieredPolicy;
use crate::smdp::{Environment, RewardMode};

pub const ER_GAMMA: f64 = 0.99;

/// Training configuration whose reward mode is fixed to expected return.
#[derive(Clone, Debug, PartialEq)]
pub struct ErConfig {
    inner: TrainConfig,
}

impl ErConfig {
    /// Take every setting from `base` except the reward mode and discount.
    pub fn new(base: TrainConfig) -> Result<Self> {
        Self::with_gamma(base, ER_GAMMA)
    }

    pub fn with_gamma(mut base: TrainConfig, gamma: f64) -> Result<Self> {
        base.episode.reward_mode = RewardMode::ExpectedReturn;
        base.episode.gamma = gamma;
        base.validate()?;
        Ok(ErConfig { inner: base })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.inner
    }

    pub fn gamma(&self) -> f64 {
        self.inner.episode.gamma
    }
}

impl TryFrom<TrainConfig> for ErConfig {
    type Error = Error;

    fn try_from(cfg: TrainConfig) -> Result<Self> {
        ErConfig::new(cfg)
    }
}

pub fn train_er<E, F>(make_env: F, init: TwoTieredPolicy, cfg: &ErConfig) -> Result<TrainOutcome>
where
    E: Environment,
    F: Fn() -> E + Sync,
{
    debug_assert_eq!(cfg.inner.episode.reward_mode, RewardMode::ExpectedReturn);
    train(make_env, init, &cfg.inner)
}
