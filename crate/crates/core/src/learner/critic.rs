//! Linear TD(0) critic over the inter-skill features of the augmented state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::dot;
use crate::smdp::{trajectory::discount, AugmentedState, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticUpdate {
    pub weights: Vec<f64>,
    /// TD error of every record, computed during the pass.
    pub td_errors: Vec<f64>,
}

impl Critic {
    pub fn zeros(len: usize) -> Self {
        Critic { weights: vec![0.0; len] }
    }

    pub fn value(&self, phi: &[f64]) -> f64 {
        dot(&self.weights, phi)
    }

    /// TD errors `r_h + gamma^{k_h} V(z_{h+1}) - V(z_h)` under the current
    /// weights, where `k_h` is the skill's duration and `V` is zero at the
    /// horizon.
    pub fn td_errors<F>(&self, trajectory: &Trajectory, features: F, gamma: f64) -> Result<Vec<f64>>
    where
        F: Fn(&AugmentedState) -> Result<Vec<f64>>,
    {
        let mut out = Vec::with_capacity(trajectory.steps.len());
        for step in &trajectory.steps {
            let phi = checked_features(&features, &step.z, self.weights.len())?;
            out.push(self.td_error(trajectory, step, &phi, &features, gamma)?);
        }
        Ok(out)
    }

    fn td_error<F>(
        &self,
        trajectory: &Trajectory,
        step: &crate::smdp::Step,
        phi: &[f64],
        features: &F,
        gamma: f64,
    ) -> Result<f64>
    where
        F: Fn(&AugmentedState) -> Result<Vec<f64>>,
    {
        let next_value = if step.z_next.t >= trajectory.horizon {
            0.0
        } else {
            let phi_next = checked_features(features, &step.z_next, self.weights.len())?;
            discount(gamma, step.z_next.t - step.z.t) * self.value(&phi_next)
        };
        Ok(step.reward + next_value - self.value(phi))
    }
}

fn checked_features<F>(features: &F, z: &AugmentedState, len: usize) -> Result<Vec<f64>>
where
    F: Fn(&AugmentedState) -> Result<Vec<f64>>,
{
    let phi = features(z)?;
    if phi.len() != len {
        return Err(Error::dimension("critic features", len, phi.len()));
    }
    Ok(phi)
}

/// One online TD(0) pass over `trajectory`, returning the new weights and
/// the TD errors seen along the way.
pub fn critic_update<F>(trajectory: &Trajectory, weights: &[f64], features: F, gamma: f64, step_size: f64) -> Result<CriticUpdate>
where
    F: Fn(&AugmentedState) -> Result<Vec<f64>>,
{
    let mut critic = Critic {
        weights: weights.to_vec(),
    };
    let mut td_errors = Vec::with_capacity(trajectory.steps.len());
    for step in &trajectory.steps {
        let phi = checked_features(&features, &step.z, critic.weights.len())?;
        let delta = critic.td_error(trajectory, step, &phi, &features, gamma)?;
        if !delta.is_finite() {
            return Err(Error::Validation(format!(
                "non-finite TD error at t = {} (reward {}, max |weight| {})",
                step.z.t,
                step.reward,
                critic.weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()))
            )));
        }
        for (w, f) in critic.weights.iter_mut().zip(&phi) {
            *w += step_size * delta * f;
        }
        td_errors.push(delta);
    }
    Ok(CriticUpdate {
        weights: critic.weights,
        td_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smdp::{EnvState, EpisodeEnd, Step};

    fn chain(rewards: &[f64], horizon: u32) -> Trajectory {
        let state = |t: u32, w: f64| AugmentedState {
            env: EnvState { features: vec![0.0] },
            w,
            t,
        };
        let mut w = 0.0;
        let steps = rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let z = state(i as u32, w);
                w += r;
                Step {
                    z,
                    skill: 0,
                    rap: 0.0,
                    rap_raw: 0.0,
                    base_reward: r,
                    reward: r,
                    z_next: state(i as u32 + 1, w),
                }
            })
            .collect();
        Trajectory {
            steps,
            horizon,
            beta: 1.0,
            end: EpisodeEnd::Timeout,
        }
    }

    fn constant(_: &AugmentedState) -> Result<Vec<f64>> {
        Ok(vec![1.0])
    }

    #[test]
    fn zero_rewards_keep_zero_weights() {
        let tr = chain(&[0.0; 20], 20);
        let up = critic_update(&tr, &[0.0], constant, 0.9, 0.1).unwrap();
        assert_eq!(up.weights, vec![0.0]);
        assert!(up.td_errors.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn zero_step_size_leaves_weights() {
        let tr = chain(&[1.0, -2.0, 0.5], 3);
        let up = critic_update(&tr, &[0.3], constant, 0.9, 0.0).unwrap();
        assert_eq!(up.weights, vec![0.3]);
    }

    #[test]
    fn myopic_value_converges_to_immediate_reward() {
        let tr = chain(&[1.0; 10_000], 10_000);
        let up = critic_update(&tr, &[0.0], constant, 0.0, 0.01).unwrap();
        assert!((up.weights[0] - 1.0).abs() < 1e-3, "{:?}", up.weights);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let tr = chain(&[1.0], 1);
        assert!(critic_update(&tr, &[0.0, 0.0], constant, 0.5, 0.1).is_err());
    }
}
