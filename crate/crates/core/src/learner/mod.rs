//! Gradient estimation, the two-timescale projected update, and training.

pub mod critic;
pub mod estimator;
pub mod schedule;
pub mod tiny;
mod train;

pub use critic::{critic_update, Critic, CriticUpdate};
pub use estimator::{estimate_gradients, trajectory_gradient, Advantage, GradientEstimate};
pub use schedule::{ProjectionBox, StepSchedule};
pub use train::{train, write_curve, CurvePoint, EarlyStop, EstimatorKind, TrainConfig, TrainOutcome, CURVE_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::TwoTieredPolicy;

/// Projection boxes for `alpha` (inter-skill) and `Omega` (RAD).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boxes {
    pub alpha: ProjectionBox,
    pub omega: ProjectionBox,
}

impl Boxes {
    pub fn uniform(policy: &TwoTieredPolicy, alpha: (f64, f64), omega: (f64, f64)) -> Result<Self> {
        Ok(Boxes {
            alpha: ProjectionBox::uniform(policy.inter.alpha.len(), alpha.0, alpha.1)?,
            omega: ProjectionBox::uniform(policy.rad.omega.len(), omega.0, omega.1)?,
        })
    }

    pub fn contains(&self, policy: &TwoTieredPolicy) -> bool {
        self.alpha.contains(&policy.inter.alpha) && self.omega.contains(&policy.rad.omega)
    }

    /// Fraction of all parameters sitting on a box face.
    pub fn saturation(&self, policy: &TwoTieredPolicy) -> f64 {
        let total = policy.inter.alpha.len() + policy.rad.omega.len();
        if total == 0 {
            return 0.0;
        }
        (self.alpha.saturated(&policy.inter.alpha) + self.omega.saturated(&policy.rad.omega)) as f64 / total as f64
    }
}

/// `alpha <- Gamma_alpha(alpha + a_k grad_alpha)`,
/// `Omega <- Gamma_Omega(Omega + b_k grad_Omega)`.
///
/// Non-finite gradients reject the step and leave `policy` untouched.
pub fn saricos_step(
    policy: &TwoTieredPolicy,
    grads: &GradientEstimate,
    k: u64,
    schedule: &StepSchedule,
    boxes: &Boxes,
) -> Result<TwoTieredPolicy> {
    if grads.grad_alpha.shape() != policy.inter.alpha.shape() {
        return Err(Error::dimension(
            "alpha gradient",
            format!("{:?}", policy.inter.alpha.shape()),
            format!("{:?}", grads.grad_alpha.shape()),
        ));
    }
    if grads.grad_omega.shape() != policy.rad.omega.shape() {
        return Err(Error::dimension(
            "omega gradient",
            format!("{:?}", policy.rad.omega.shape()),
            format!("{:?}", grads.grad_omega.shape()),
        ));
    }
    if !grads.grad_alpha.is_finite() {
        return Err(Error::NonFinite { what: "alpha gradient", iteration: k });
    }
    if !grads.grad_omega.is_finite() {
        return Err(Error::NonFinite { what: "omega gradient", iteration: k });
    }
    let mut next = policy.clone();
    next.inter.alpha.add_scaled(&grads.grad_alpha, schedule.slow(k));
    next.rad.omega.add_scaled(&grads.grad_omega, schedule.fast(k));
    boxes.alpha.project(&mut next.inter.alpha)?;
    boxes.omega.project(&mut next.rad.omega)?;
    Ok(next)
}
