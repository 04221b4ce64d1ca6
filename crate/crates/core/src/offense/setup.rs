//! Policy construction for the offense environment.

use serde::{Deserialize, Serialize};

use super::{skill_names, MiniOffense, RAP_MAX, STATE_DIM};
use crate::error::{Error, Result};
use crate::policy::{Coupling, FeatureSpec, Input, RadFeatureSpec, TwoTieredPolicy};
use crate::smdp::Environment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySetup {
    pub fourier_order: u32,
    pub coupling: Coupling,
    /// Normalisation range of `w` for the inter-skill features.
    pub w_bounds: (f64, f64),
    /// Normalisation range of `w` for the RAD features.
    pub rad_w_bounds: (f64, f64),
    pub variance: f64,
    pub initial_rap_mean: f64,
    /// Initial inter-skill logits for Move, Shoot, Dribble (carried by the
    /// constant feature).
    pub initial_logits: [f64; 3],
}

impl Default for PolicySetup {
    fn default() -> Self {
        PolicySetup {
            fourier_order: 3,
            coupling: Coupling::Decoupled,
            w_bounds: (-1.0, 2.5),
            rad_w_bounds: (0.0, 2.0),
            variance: 25.0,
            initial_rap_mean: 20.0,
            initial_logits: [0.0, -2.5, 0.0],
        }
    }
}

impl PolicySetup {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            out.push(format!("policy.variance = {} must be positive", self.variance));
        }
        for (name, (lo, hi)) in [("policy.w_bounds", self.w_bounds), ("policy.rad_w_bounds", self.rad_w_bounds)] {
            if !(lo < hi) {
                out.push(format!("{name} needs lower < upper, got [{lo}, {hi}]"));
            }
        }
        if !self.initial_rap_mean.is_finite() || self.initial_logits.iter().any(|l| !l.is_finite()) {
            out.push("policy initial values must be finite".into());
        }
        if self.fourier_order == 0 {
            out.push("policy.fourier_order must be at least 1".into());
        }
        out
    }

    /// Inter-skill features over striker position, `w` and elapsed time.
    pub fn features(&self, horizon: u32) -> Result<FeatureSpec> {
        FeatureSpec::fourier(
            self.fourier_order,
            self.coupling,
            vec![Input::Env(0), Input::Env(1), Input::W, Input::T],
            vec![(0.0, 1.0), (0.0, 1.0), self.w_bounds, (0.0, horizon as f64)],
        )
    }

    pub fn build(&self, env: &MiniOffense, horizon: u32) -> Result<TwoTieredPolicy> {
        if let Some(msg) = self.violations().first() {
            return Err(Error::Config(msg.clone()));
        }
        let features = self.features(horizon)?;
        let rad = RadFeatureSpec::spatial(env.spatial_layout(), self.rad_w_bounds)?;
        let mut policy = TwoTieredPolicy::initial(
            features,
            rad,
            self.variance,
            self.initial_rap_mean,
            (0.0, RAP_MAX),
            skill_names(),
            STATE_DIM,
        )?;
        for (i, &l) in self.initial_logits.iter().enumerate() {
            policy.inter.alpha.set(i, 0, l);
        }
        Ok(policy)
    }
}
