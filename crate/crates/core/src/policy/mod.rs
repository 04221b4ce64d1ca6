//! Two-tiered skill selection `mu(sigma, y | z) = mu_alpha(sigma | z) * mu_omega^sigma(y | z)`.
//!
//! The inter-skill tier is a Gibbs distribution over linear scores of
//! Fourier features. Each skill's risk-awareness parameter (RAP) is drawn
//! from a Gaussian with mean `phi(z)^T omega_sigma` and a shared fixed
//! variance. The executed RAP is clamped; gradients use the raw draw.

mod checkpoint;
mod features;

pub use checkpoint::{Checkpoint, SeedLineage, CHECKPOINT_SCHEMA_VERSION};
pub use features::{
    clamp_events, fourier_features, rad_features, Coupling, FeatureKind, FeatureSpec, Input, RadFeatureSpec,
};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RandomSource;
use crate::smdp::AugmentedState;

/// Inter-skill parameters, one row of feature weights per skill.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterSkillParams {
    pub alpha: Matrix,
}

/// Risk-aware distribution parameters, one row `omega_i` per skill.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadParams {
    pub omega: Matrix,
    pub variance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    #[default]
    Sample,
    /// Argmax skill (lowest index on ties) and the RAD mean.
    Greedy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    pub skill: usize,
    pub rap: f64,
    pub rap_raw: f64,
}

/// A RAP draw: the executed (clamped) value and the raw Gaussian sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RapDraw {
    pub executed: f64,
    pub raw: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoTieredPolicy {
    pub inter: InterSkillParams,
    pub rad: RadParams,
    pub features: FeatureSpec,
    pub rad_features: RadFeatureSpec,
    pub rap_clamp: (f64, f64),
    pub skills: Vec<String>,
    pub state_dim: usize,
}

impl TwoTieredPolicy {
    pub fn new(
        inter: InterSkillParams,
        rad: RadParams,
        features: FeatureSpec,
        rad_features: RadFeatureSpec,
        rap_clamp: (f64, f64),
        skills: Vec<String>,
        state_dim: usize,
    ) -> Result<Self> {
        let policy = TwoTieredPolicy {
            inter,
            rad,
            features,
            rad_features,
            rap_clamp,
            skills,
            state_dim,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// Zero inter-skill weights (uniform skill choice) and RAD means equal
    /// to `initial_rap_mean` everywhere.
    pub fn initial(
        features: FeatureSpec,
        rad_features: RadFeatureSpec,
        variance: f64,
        initial_rap_mean: f64,
        rap_clamp: (f64, f64),
        skills: Vec<String>,
        state_dim: usize,
    ) -> Result<Self> {
        let n = skills.len();
        let alpha = Matrix::zeros(n, features.len());
        let mut omega = Matrix::zeros(n, rad_features.len());
        for i in 0..n {
            omega.set(i, 0, initial_rap_mean);
        }
        TwoTieredPolicy::new(
            InterSkillParams { alpha },
            RadParams { omega, variance },
            features,
            rad_features,
            rap_clamp,
            skills,
            state_dim,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.rad_features.validate()?;
        let n = self.skills.len();
        if n == 0 {
            return Err(Error::Validation("policy needs at least one skill".into()));
        }
        let expect_alpha = (n, self.features.len());
        if self.inter.alpha.shape() != expect_alpha {
            return Err(Error::dimension("alpha", format!("{expect_alpha:?}"), format!("{:?}", self.inter.alpha.shape())));
        }
        let expect_omega = (n, self.rad_features.len());
        if self.rad.omega.shape() != expect_omega {
            return Err(Error::dimension("omega", format!("{expect_omega:?}"), format!("{:?}", self.rad.omega.shape())));
        }
        if !(self.rad.variance > 0.0 && self.rad.variance.is_finite()) {
            return Err(Error::Validation(format!("RAD variance {} must be positive", self.rad.variance)));
        }
        if !(self.rap_clamp.0 <= self.rap_clamp.1) {
            return Err(Error::Validation("RAP clamp range is empty".into()));
        }
        if !self.inter.alpha.is_finite() || !self.rad.omega.is_finite() {
            return Err(Error::Validation("policy parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn num_skills(&self) -> usize {
        self.skills.len()
    }

    pub fn check_environment(&self, state_dim: usize, num_skills: usize) -> Result<()> {
        if state_dim != self.state_dim {
            return Err(Error::dimension("environment state", self.state_dim, state_dim));
        }
        if num_skills != self.num_skills() {
            return Err(Error::dimension("skill count", self.num_skills(), num_skills));
        }
        Ok(())
    }

    pub fn inter_features(&self, z: &AugmentedState) -> Result<Vec<f64>> {
        self.features.project(z)
    }

    pub fn rad_features(&self, z: &AugmentedState) -> Result<Vec<f64>> {
        self.rad_features.project(z)
    }

    pub fn skill_probs(&self, z: &AugmentedState) -> Result<Vec<f64>> {
        inter_skill_probs(&self.inter.alpha, &self.inter_features(z)?)
    }

    /// Mean of skill `skill`'s RAD in state `z` (before clamping).
    pub fn rap_mean(&self, z: &AugmentedState, skill: usize) -> Result<f64> {
        Ok(dot(self.rad.omega.row(skill), &self.rad_features(z)?))
    }

    pub fn act(&self, z: &AugmentedState, mode: ActionMode, rng: &mut RandomSource) -> Result<Action> {
        let probs = self.skill_probs(z)?;
        let phi = self.rad_features(z)?;
        match mode {
            ActionMode::Sample => {
                let skill = sample_skill(&probs, rng);
                let draw = rad_sample(self.rad.omega.row(skill), &phi, self.rad.variance, self.rap_clamp, rng)?;
                Ok(Action {
                    skill,
                    rap: draw.executed,
                    rap_raw: draw.raw,
                })
            }
            ActionMode::Greedy => {
                let skill = argmax(&probs);
                let mean = dot(self.rad.omega.row(skill), &phi);
                Ok(Action {
                    skill,
                    rap: mean.clamp(self.rap_clamp.0, self.rap_clamp.1),
                    rap_raw: mean,
                })
            }
        }
    }

    /// `log mu_alpha(sigma | z) + log mu_omega^sigma(y | z)`.
    pub fn log_prob(&self, z: &AugmentedState, sigma: usize, y: f64) -> Result<f64> {
        two_tiered_log_prob(self, z, sigma, y)
    }

    /// Joint log-likelihood gradient `(d/d alpha, d/d Omega)` of one decision.
    pub fn log_grad(&self, z: &AugmentedState, sigma: usize, y: f64) -> Result<(Matrix, Matrix)> {
        let g_alpha = log_grad_inter(&self.inter.alpha, &self.inter_features(z)?, sigma)?;
        let mut g_omega = Matrix::zeros(self.rad.omega.rows(), self.rad.omega.cols());
        let row = log_grad_rad(self.rad.omega.row(sigma), &self.rad_features(z)?, y, self.rad.variance)?;
        g_omega.row_mut(sigma).copy_from_slice(&row);
        Ok((g_alpha, g_omega))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn logits(alpha: &Matrix, features: &[f64]) -> Result<Vec<f64>> {
    if features.len() != alpha.cols() {
        return Err(Error::dimension("inter-skill features", alpha.cols(), features.len()));
    }
    Ok((0..alpha.rows()).map(|i| dot(alpha.row(i), features)).collect())
}

/// Log-softmax with max subtraction.
fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - log_norm).collect()
}

/// Gibbs probabilities `p_i = exp(alpha_i . phi) / sum_j exp(alpha_j . phi)`.
///
/// Computed with max subtraction; probabilities are floored at the smallest
/// positive normal `f64` so every skill keeps nonzero mass.
pub fn inter_skill_probs(alpha: &Matrix, features: &[f64]) -> Result<Vec<f64>> {
    let l = logits(alpha, features)?;
    Ok(log_softmax(&l).into_iter().map(|lp| lp.exp().max(f64::MIN_POSITIVE)).collect())
}

/// Inverse-CDF draw of a skill index.
pub fn sample_skill(probs: &[f64], rng: &mut RandomSource) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u at the top of the range: take the last skill with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Draw `y ~ N(phi^T omega_i, V)` and clamp the executed value to `clamp`.
pub fn rad_sample(omega_i: &[f64], phi: &[f64], variance: f64, clamp: (f64, f64), rng: &mut RandomSource) -> Result<RapDraw> {
    if !(variance > 0.0) {
        return Err(Error::Validation(format!("RAD variance {variance} must be positive")));
    }
    if omega_i.len() != phi.len() {
        return Err(Error::dimension("RAD features", omega_i.len(), phi.len()));
    }
    let mean = dot(omega_i, phi);
    let normal = Normal::new(mean, variance.sqrt()).map_err(|e| Error::Validation(e.to_string()))?;
    let raw = normal.sample(rng);
    Ok(RapDraw {
        executed: raw.clamp(clamp.0, clamp.1),
        raw,
    })
}

/// Gibbs log-gradient: row `i` is `(1{i = chosen} - p_i) * phi`.
pub fn log_grad_inter(alpha: &Matrix, features: &[f64], chosen: usize) -> Result<Matrix> {
    if chosen >= alpha.rows() {
        return Err(Error::dimension("chosen skill", format!("< {}", alpha.rows()), chosen));
    }
    let probs = inter_skill_probs(alpha, features)?;
    let mut grad = Matrix::zeros(alpha.rows(), alpha.cols());
    for (i, &p) in probs.iter().enumerate() {
        let coef = if i == chosen { 1.0 - p } else { -p };
        for (g, &f) in grad.row_mut(i).iter_mut().zip(features) {
            *g = coef * f;
        }
    }
    Ok(grad)
}

/// Gaussian log-gradient with respect to the mean weights:
/// `phi * (y - phi^T omega_i) / V`.
pub fn log_grad_rad(omega_i: &[f64], phi: &[f64], y: f64, variance: f64) -> Result<Vec<f64>> {
    if !(variance > 0.0) {
        return Err(Error::Validation(format!("RAD variance {variance} must be positive")));
    }
    if omega_i.len() != phi.len() {
        return Err(Error::dimension("RAD features", omega_i.len(), phi.len()));
    }
    let scale = (y - dot(omega_i, phi)) / variance;
    Ok(phi.iter().map(|f| f * scale).collect())
}

pub fn gaussian_log_density(y: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * ((y - mean).powi(2) / variance + (2.0 * PI * variance).ln())
}

pub fn two_tiered_log_prob(policy: &TwoTieredPolicy, z: &AugmentedState, sigma: usize, y: f64) -> Result<f64> {
    let l = logits(&policy.inter.alpha, &policy.inter_features(z)?)?;
    if sigma >= l.len() {
        return Err(Error::dimension("skill", format!("< {}", l.len()), sigma));
    }
    let log_inter = log_softmax(&l)[sigma];
    let mean = policy.rap_mean(z, sigma)?;
    Ok(log_inter + gaussian_log_density(y, mean, policy.rad.variance))
}

#[cfg(test)]
mod tests;
