//! Probabilistic-goal semi-MDP machinery.
//!
//! The environment state is augmented with the accumulated base reward `w`
//! and a step counter `t`. Skills run to termination and may consume several
//! timesteps; the episode reward in probabilistic-goal mode is the terminal
//! indicator `1{w >= beta}` paid at `t == T`.

pub(crate) mod trajectory;

pub use trajectory::{dump_trajectory, parse_trajectory_dump, DumpRecord, EpisodeEnd, Step, Trajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ActionMode, TwoTieredPolicy};
use crate::rng::RandomSource;

/// Raw environment observation. Dimensionality is fixed per environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub features: Vec<f64>,
}

impl EnvState {
    pub fn new(features: Vec<f64>) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("environment state has non-finite entries".into()));
        }
        Ok(EnvState { features })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// `z = {x, w}` plus the elapsed step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub env: EnvState,
    pub w: f64,
    pub t: u32,
}

impl AugmentedState {
    pub fn initial(env: EnvState) -> Self {
        AugmentedState { env, w: 0.0, t: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Terminal indicator reward `1{w >= beta}` at `t == T`.
    ProbabilisticGoal,
    /// Raw shaped rewards at every decision.
    ExpectedReturn,
}

impl RewardMode {
    pub fn tag(self) -> &'static str {
        match self {
            RewardMode::ProbabilisticGoal => "saricos",
            RewardMode::ExpectedReturn => "er",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub horizon: u32,
    pub beta: f64,
    pub gamma: f64,
    pub reward_mode: RewardMode,
}

impl EpisodeConfig {
    pub fn new(horizon: u32, beta: f64, gamma: f64, reward_mode: RewardMode) -> Result<Self> {
        let cfg = EpisodeConfig {
            horizon,
            beta,
            gamma,
            reward_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Validation("horizon T must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Validation(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !self.beta.is_finite() {
            return Err(Error::Validation("beta must be finite".into()));
        }
        Ok(())
    }
}

/// Result of running one skill to termination.
#[derive(Clone, Debug, PartialEq)]
pub struct SkillOutcome {
    /// Timesteps consumed, at least 1 and at most the remaining budget.
    pub steps: u32,
    /// Undiscounted base reward summed over the consumed timesteps.
    pub reward: f64,
    pub next: EnvState,
    /// Set when the episode ended inside the skill (e.g. a goal or a capture).
    pub terminal: Option<String>,
}

/// Field geometry an environment may expose for the spatial RAD features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialLayout {
    pub agent_x: usize,
    pub agent_y: usize,
    pub goal: (f64, f64),
    pub x_bounds: (f64, f64),
    pub y_bounds: (f64, f64),
}

pub trait Environment {
    fn state_dim(&self) -> usize;

    fn num_skills(&self) -> usize;

    fn reset(&mut self, rng: &mut RandomSource) -> EnvState;

    /// Run `skill` with executed risk-awareness parameter `rap`. Must consume
    /// between 1 and `max_steps` timesteps.
    fn execute(&mut self, skill: usize, rap: f64, max_steps: u32, rng: &mut RandomSource) -> Result<SkillOutcome>;

    fn spatial_layout(&self) -> Option<SpatialLayout> {
        None
    }
}

/// Augmented transition: `{x', w + r}` with the step counter advanced by the
/// skill's duration.
pub fn augment_transition(z: &AugmentedState, skill_reward: f64, next_env: EnvState, elapsed: u32) -> Result<AugmentedState> {
    if !skill_reward.is_finite() {
        return Err(Error::Validation(format!("non-finite skill reward {skill_reward}")));
    }
    Ok(AugmentedState {
        env: next_env,
        w: z.w + skill_reward,
        t: z.t + elapsed,
    })
}

/// Terminal indicator reward: zero before the horizon, `1{w >= beta}` at it.
pub fn augmented_reward(t: u32, horizon: u32, w: f64, beta: f64) -> Result<f64> {
    if t > horizon {
        return Err(Error::Contract(format!("step {t} beyond horizon {horizon}")));
    }
    Ok(if t == horizon && w >= beta { 1.0 } else { 0.0 })
}

pub fn run_episode<E: Environment + ?Sized>(
    env: &mut E,
    policy: &TwoTieredPolicy,
    cfg: &EpisodeConfig,
    rng: &mut RandomSource,
) -> Result<Trajectory> {
    run_episode_with(env, policy, cfg, ActionMode::Sample, rng)
}

/// Roll out one episode. The environment is reset first; skills are only
/// re-selected after the running skill terminates.
pub fn run_episode_with<E: Environment + ?Sized>(
    env: &mut E,
    policy: &TwoTieredPolicy,
    cfg: &EpisodeConfig,
    mode: ActionMode,
    rng: &mut RandomSource,
) -> Result<Trajectory> {
    cfg.validate()?;
    policy.check_environment(env.state_dim(), env.num_skills())?;
    let horizon = cfg.horizon;
    let mut z = AugmentedState::initial(env.reset(rng));
    let mut steps = Vec::new();
    let mut end = EpisodeEnd::Timeout;

    while z.t < horizon {
        let index = steps.len();
        let action = policy.act(&z, mode, rng)?;
        let outcome = env
            .execute(action.skill, action.rap, horizon - z.t, rng)
            .map_err(|e| Error::EnvStep { step: index, source: Box::new(e) })?;
        if outcome.steps == 0 || outcome.steps > horizon - z.t {
            return Err(Error::EnvStep {
                step: index,
                source: Box::new(Error::Contract(format!(
                    "skill consumed {} steps with {} remaining",
                    outcome.steps,
                    horizon - z.t
                ))),
            });
        }
        let base_reward = outcome.reward;
        let mut z_next = augment_transition(&z, base_reward, outcome.next, outcome.steps)
            .map_err(|e| Error::EnvStep { step: index, source: Box::new(e) })?;
        if let Some(event) = outcome.terminal {
            // Absorbing until the horizon with zero base reward.
            end = EpisodeEnd::Terminated { step: z_next.t, event };
            z_next.t = horizon;
        }
        let reward = match cfg.reward_mode {
            RewardMode::ProbabilisticGoal => augmented_reward(z_next.t, horizon, z_next.w, cfg.beta)?,
            RewardMode::ExpectedReturn => base_reward,
        };
        steps.push(Step {
            z: std::mem::replace(&mut z, z_next.clone()),
            skill: action.skill,
            rap: action.rap,
            rap_raw: action.rap_raw,
            base_reward,
            reward,
            z_next,
        });
        if matches!(end, EpisodeEnd::Terminated { .. }) {
            break;
        }
    }

    Ok(Trajectory {
        steps,
        horizon,
        beta: cfg.beta,
        end,
    })
}

/// Fraction of trajectories whose final accumulated reward reaches `beta`.
pub fn success_probability_estimate(trajectories: &[Trajectory], beta: f64) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(Error::Validation("no trajectories to estimate from".into()));
    }
    let hits = trajectories.iter().filter(|tr| tr.final_w() >= beta).count();
    Ok(hits as f64 / trajectories.len() as f64)
}

#[cfg(test)]
mod tests;
