//! Likelihood-ratio gradient estimates for both policy tiers.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::policy::{dot, inter_skill_probs, TwoTieredPolicy};
use crate::smdp::Trajectory;

use super::critic::Critic;

/// How each decision's log-likelihood gradient is weighted.
#[derive(Clone, Copy, Debug)]
pub enum Advantage<'a> {
    /// The full discounted trajectory return `sum_j gamma^{t_j} r_j` for every
    /// decision.
    Return,
    /// Full return minus a state-dependent baseline `V(z_h)`.
    ReturnMinusBaseline(&'a Critic),
    /// The critic's TD error at each decision (actor-critic).
    TdError(&'a Critic),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub grad_alpha: Matrix,
    pub grad_omega: Matrix,
    pub batch_size: usize,
    pub mean_return: f64,
}

impl GradientEstimate {
    pub fn zeros(policy: &TwoTieredPolicy) -> Self {
        GradientEstimate {
            grad_alpha: Matrix::zeros(policy.inter.alpha.rows(), policy.inter.alpha.cols()),
            grad_omega: Matrix::zeros(policy.rad.omega.rows(), policy.rad.omega.cols()),
            batch_size: 0,
            mean_return: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.grad_alpha.is_finite() && self.grad_omega.is_finite()
    }
}

/// Gradient contribution of a single trajectory, plus its discounted return.
pub fn trajectory_gradient(
    trajectory: &Trajectory,
    policy: &TwoTieredPolicy,
    gamma: f64,
    advantage: Advantage<'_>,
) -> Result<(GradientEstimate, f64)> {
    let mut est = GradientEstimate::zeros(policy);
    let ret = trajectory.discounted_return(gamma);
    let td = match advantage {
        Advantage::TdError(critic) => Some(critic.td_errors(trajectory, |z| policy.inter_features(z), gamma)?),
        _ => None,
    };
    for (h, step) in trajectory.steps.iter().enumerate() {
        if step.skill >= policy.num_skills() {
            return Err(Error::Validation(format!(
                "trajectory uses skill {} but the policy has {}",
                step.skill,
                policy.num_skills()
            )));
        }
        if step.z.env.dim() != policy.state_dim {
            return Err(Error::dimension("trajectory state", policy.state_dim, step.z.env.dim()));
        }
        if !step.rap_raw.is_finite() {
            return Err(Error::Validation("trajectory holds a non-finite RAP draw".into()));
        }
        let phi = policy.inter_features(&step.z)?;
        let weight = match advantage {
            Advantage::Return => ret,
            Advantage::ReturnMinusBaseline(critic) => ret - critic.value(&phi),
            Advantage::TdError(_) => td.as_ref().map_or(0.0, |d| d[h]),
        };
        if weight == 0.0 {
            continue;
        }
        let probs = inter_skill_probs(&policy.inter.alpha, &phi)?;
        for (i, &p) in probs.iter().enumerate() {
            let coef = weight * if i == step.skill { 1.0 - p } else { -p };
            for (g, f) in est.grad_alpha.row_mut(i).iter_mut().zip(&phi) {
                *g += coef * f;
            }
        }
        let psi = policy.rad_features(&step.z)?;
        let omega = policy.rad.omega.row(step.skill);
        let scale = weight * (step.rap_raw - dot(omega, &psi)) / policy.rad.variance;
        for (g, f) in est.grad_omega.row_mut(step.skill).iter_mut().zip(&psi) {
            *g += scale * f;
        }
    }
    est.batch_size = 1;
    est.mean_return = ret;
    Ok((est, ret))
}

/// Batch mean of the per-trajectory estimates
/// `[sum_h grad log mu(sigma_h, y_h | z_h)] * weight_h`.
pub fn estimate_gradients(
    batch: &[Trajectory],
    policy: &TwoTieredPolicy,
    gamma: f64,
    advantage: Advantage<'_>,
) -> Result<GradientEstimate> {
    if batch.is_empty() {
        return Err(Error::Validation("empty trajectory batch".into()));
    }
    let mut total = GradientEstimate::zeros(policy);
    let mut return_sum = 0.0;
    for trajectory in batch {
        let (g, ret) = trajectory_gradient(trajectory, policy, gamma, advantage)?;
        total.grad_alpha.add_scaled(&g.grad_alpha, 1.0);
        total.grad_omega.add_scaled(&g.grad_omega, 1.0);
        return_sum += ret;
    }
    let n = batch.len() as f64;
    total.grad_alpha.scale(1.0 / n);
    total.grad_omega.scale(1.0 / n);
    total.batch_size = batch.len();
    total.mean_return = return_sum / n;
    Ok(total)
}
