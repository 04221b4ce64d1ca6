//! Batched training loop.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::TwoTieredPolicy;
use crate::rng;
use crate::smdp::{run_episode, success_probability_estimate, Environment, EpisodeConfig, Trajectory};

use super::critic::{critic_update, Critic};
use super::estimator::{estimate_gradients, Advantage};
use super::schedule::StepSchedule;
use super::{saricos_step, Boxes};

pub const CURVE_SCHEMA_VERSION: u32 = 1;

/// Consecutive heavily saturated batches before a divergence warning.
const SATURATION_STREAK: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Full discounted return per decision.
    Return,
    /// TD(0) critic, advantage = TD error.
    ActorCritic,
}

/// Stop once the mean return over consecutive windows stops moving.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarlyStop {
    pub window: usize,
    pub tolerance: f64,
    /// No stopping before this many episodes.
    pub min_episodes: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop {
            window: 500,
            tolerance: 1e-3,
            min_episodes: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub batch_size: usize,
    pub episode: EpisodeConfig,
    pub schedule: StepSchedule,
    pub alpha_bounds: (f64, f64),
    pub omega_bounds: (f64, f64),
    pub estimator: EstimatorKind,
    pub critic_step: f64,
    pub early_stop: Option<EarlyStop>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.episode.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Validation("batch size must be positive".into()));
        }
        if !(self.critic_step >= 0.0 && self.critic_step.is_finite()) {
            return Err(Error::Validation(format!("critic step {} must be finite and nonnegative", self.critic_step)));
        }
        for (name, (lo, hi)) in [("alpha", self.alpha_bounds), ("omega", self.omega_bounds)] {
            if !(lo < hi) {
                return Err(Error::Validation(format!("{name} box needs lower < upper, got [{lo}, {hi}]")));
            }
        }
        if let Some(es) = &self.early_stop {
            if es.window == 0 {
                return Err(Error::Validation("early-stop window must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One row of the learning curve, written after every update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: u64,
    pub episodes: usize,
    /// Mean undiscounted sum of recorded rewards over the batch.
    pub mean_return: f64,
    pub success_prob: f64,
    pub mean_length: f64,
    pub saturation: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub policy: TwoTieredPolicy,
    pub critic: Critic,
    pub curve: Vec<CurvePoint>,
    pub warnings: Vec<String>,
    pub episodes_run: usize,
    pub stopped_early: bool,
}

/// Run batches of episodes, estimate gradients and apply the projected
/// two-timescale update. Episode `n` draws from random stream `n` of
/// `cfg.seed`, so results do not depend on the worker count.
pub fn train<E, F>(make_env: F, init: TwoTieredPolicy, cfg: &TrainConfig) -> Result<TrainOutcome>
where
    E: Environment,
    F: Fn() -> E + Sync,
{
    cfg.validate()?;
    init.validate()?;
    let boxes = Boxes::uniform(&init, cfg.alpha_bounds, cfg.omega_bounds)?;
    let mut policy = init;
    boxes.alpha.project(&mut policy.inter.alpha)?;
    boxes.omega.project(&mut policy.rad.omega)?;
    let mut critic = Critic::zeros(policy.features.len());
    let mut curve = Vec::new();
    let mut warnings = Vec::new();
    let mut recent: VecDeque<f64> = VecDeque::new();
    let mut previous_window: Option<f64> = None;
    let mut next_check = cfg.early_stop.map(|es| es.window);
    let mut streak = 0usize;
    let mut episodes = 0usize;
    let mut k = 0u64;
    let mut stopped_early = false;

    while episodes < cfg.episodes {
        let n = cfg.batch_size.min(cfg.episodes - episodes);
        let batch = rollout_batch(&make_env, &policy, &cfg.episode, cfg.seed, episodes, n)?;
        let gamma = cfg.episode.gamma;
        let grads = match cfg.estimator {
            EstimatorKind::Return => estimate_gradients(&batch, &policy, gamma, Advantage::Return)?,
            EstimatorKind::ActorCritic => {
                let g = estimate_gradients(&batch, &policy, gamma, Advantage::TdError(&critic))?;
                for tr in &batch {
                    let upd = critic_update(tr, &critic.weights, |z| policy.inter_features(z), gamma, cfg.critic_step)?;
                    critic.weights = upd.weights;
                }
                g
            }
        };
        policy = saricos_step(&policy, &grads, k, &cfg.schedule, &boxes)?;
        episodes += n;

        let returns: Vec<f64> = batch.iter().map(|tr| tr.steps.iter().map(|s| s.reward).sum()).collect();
        let saturation = boxes.saturation(&policy);
        curve.push(CurvePoint {
            iteration: k,
            episodes,
            mean_return: returns.iter().sum::<f64>() / n as f64,
            success_prob: success_probability_estimate(&batch, cfg.episode.beta)?,
            mean_length: batch.iter().map(|tr| tr.length() as f64).sum::<f64>() / n as f64,
            saturation,
        });

        if saturation > 0.9 {
            streak += 1;
            if streak == SATURATION_STREAK {
                warnings.push(format!(
                    "possible divergence: {:.0}% of parameters on the projection box for {SATURATION_STREAK} updates (iteration {k})",
                    saturation * 100.0
                ));
            }
        } else {
            streak = 0;
        }

        if let Some(es) = cfg.early_stop {
            recent.extend(returns);
            while recent.len() > es.window {
                recent.pop_front();
            }
            if next_check.is_some_and(|c| episodes >= c) {
                let avg = recent.iter().sum::<f64>() / recent.len() as f64;
                let settled = previous_window.is_some_and(|p| (avg - p).abs() < es.tolerance);
                previous_window = Some(avg);
                next_check = Some(episodes + es.window);
                if settled && episodes >= es.min_episodes {
                    stopped_early = true;
                    break;
                }
            }
        }
        k += 1;
    }

    Ok(TrainOutcome {
        policy,
        critic,
        curve,
        warnings,
        episodes_run: episodes,
        stopped_early,
    })
}

fn rollout_batch<E, F>(
    make_env: &F,
    policy: &TwoTieredPolicy,
    cfg: &EpisodeConfig,
    seed: u64,
    first: usize,
    n: usize,
) -> Result<Vec<Trajectory>>
where
    E: Environment,
    F: Fn() -> E + Sync,
{
    (first..first + n)
        .into_par_iter()
        .map(|i| {
            let mut env = make_env();
            let mut rng = rng::stream(seed, i as u64);
            run_episode(&mut env, policy, cfg, &mut rng)
        })
        .collect()
}

/// Columnar learning curve: a comment line with the schema version and mode
/// tag, a header row, then one whitespace-separated row per update.
pub fn write_curve<W: Write>(curve: &[CurvePoint], mode: &str, mut out: W) -> Result<()> {
    writeln!(out, "# schema_version={CURVE_SCHEMA_VERSION} mode={mode}")?;
    writeln!(out, "iteration episodes mean_return success_prob mean_length saturation")?;
    for p in curve {
        writeln!(
            out,
            "{} {} {:.6} {:.6} {:.3} {:.6}",
            p.iteration, p.episodes, p.mean_return, p.success_prob, p.mean_length, p.saturation
        )?;
    }
    Ok(())
}
