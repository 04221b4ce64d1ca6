use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{augmented_reward, AugmentedState};
use crate::error::{Error, Result};

/// One decision point of a risk-aware trajectory: `(z_t, sigma_t, y_t, r_t, z_{t+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub z: AugmentedState,
    pub skill: usize,
    /// Executed (clamped) risk-awareness parameter.
    pub rap: f64,
    /// Unclamped draw from the RAD; the log-likelihood gradient uses this one.
    pub rap_raw: f64,
    pub base_reward: f64,
    /// Learning signal for this record: indicator reward or base reward,
    /// depending on the episode's reward mode.
    pub reward: f64,
    pub z_next: AugmentedState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EpisodeEnd {
    Timeout,
    Terminated { step: u32, event: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub horizon: u32,
    pub beta: f64,
    pub end: EpisodeEnd,
}

impl Trajectory {
    pub fn final_w(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.z_next.w)
    }

    pub fn initial_w(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.z.w)
    }

    /// Whether the horizon `T` was reached (by timeout or through the
    /// absorbing state after an early termination).
    pub fn horizon_reached(&self) -> bool {
        self.steps.last().is_some_and(|s| s.z_next.t == self.horizon)
    }

    /// Timesteps actually played before the episode ended.
    pub fn length(&self) -> u32 {
        match &self.end {
            EpisodeEnd::Timeout => self.steps.last().map_or(0, |s| s.z_next.t),
            EpisodeEnd::Terminated { step, .. } => *step,
        }
    }

    pub fn event(&self) -> Option<&str> {
        match &self.end {
            EpisodeEnd::Timeout => None,
            EpisodeEnd::Terminated { event, .. } => Some(event),
        }
    }

    pub fn base_reward_sum(&self) -> f64 {
        self.steps.iter().map(|s| s.base_reward).sum()
    }

    /// `sum_j gamma^{t_j} r_j`, discounting each record by the timestep at
    /// which it started. With single-step skills this is `sum_j gamma^j r_j`.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.steps
            .iter()
            .map(|s| discount(gamma, s.z.t) * s.reward)
            .sum()
    }

    /// Check the chaining, horizon and accumulation invariants.
    pub fn validate(&self) -> Result<()> {
        if self.steps.len() > self.horizon as usize {
            return Err(Error::Contract(format!(
                "trajectory has {} records for horizon {}",
                self.steps.len(),
                self.horizon
            )));
        }
        for pair in self.steps.windows(2) {
            if pair[0].z_next != pair[1].z {
                return Err(Error::Contract("consecutive records do not chain".into()));
            }
            if pair[1].z.t < pair[0].z.t {
                return Err(Error::Contract("step counter decreased".into()));
            }
        }
        let accumulated = self.final_w() - self.initial_w();
        if (accumulated - self.base_reward_sum()).abs() > 1e-12 {
            return Err(Error::Contract(format!(
                "accumulated reward {accumulated} differs from base reward sum {}",
                self.base_reward_sum()
            )));
        }
        Ok(())
    }
}

pub(crate) fn discount(gamma: f64, t: u32) -> f64 {
    if gamma == 1.0 {
        1.0
    } else {
        gamma.powi(t as i32)
    }
}

/// One line of the trajectory dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpRecord {
    pub t: u32,
    pub skill: usize,
    pub rap: f64,
    pub base_reward: f64,
    pub augmented_reward: f64,
    /// Accumulated base reward after the record.
    pub w: f64,
}

/// Write one JSON object per record, one record per line.
pub fn dump_trajectory<W: Write>(trajectory: &Trajectory, mut out: W) -> Result<()> {
    for step in &trajectory.steps {
        let record = DumpRecord {
            t: step.z.t,
            skill: step.skill,
            rap: step.rap,
            base_reward: step.base_reward,
            augmented_reward: augmented_reward(step.z_next.t, trajectory.horizon, step.z_next.w, trajectory.beta)?,
            w: step.z_next.w,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn parse_trajectory_dump<R: BufRead>(input: R) -> Result<Vec<DumpRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}
