//! State features for the two policy tiers.
//!
//! The inter-skill policy sees a Fourier basis over selected components of
//! the augmented state; the RADs see a short raw vector `[1, x, y, w, d]`.
//! Inputs outside their declared bounds are clamped and counted.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smdp::{AugmentedState, SpatialLayout};

static CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of state components clamped to their bounds since process start.
pub fn clamp_events() -> u64 {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

/// A scalar read from the augmented state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Input {
    /// Component of the environment observation.
    Env(usize),
    /// Accumulated base reward.
    W,
    /// Elapsed timesteps.
    T,
}

impl Input {
    pub fn read(self, z: &AugmentedState) -> Result<f64> {
        match self {
            Input::Env(i) => z
                .env
                .features
                .get(i)
                .copied()
                .ok_or_else(|| Error::dimension("feature input", format!("index < {}", z.env.dim()), i)),
            Input::W => Ok(z.w),
            Input::T => Ok(z.t as f64),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Fourier,
    /// `[1, s_1, ..., s_d]` with each `s_i` normalised to `[0, 1]`.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// Per-dimension terms plus a constant: `1 + order * dims` features.
    Decoupled,
    /// Every coefficient vector in `{0..order}^dims`: `(order + 1)^dims` features.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    pub order: u32,
    pub coupling: Coupling,
    pub inputs: Vec<Input>,
    pub bounds: Vec<(f64, f64)>,
}

impl FeatureSpec {
    pub fn fourier(order: u32, coupling: Coupling, inputs: Vec<Input>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let spec = FeatureSpec {
            kind: FeatureKind::Fourier,
            order,
            coupling,
            inputs,
            bounds,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn raw(inputs: Vec<Input>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let spec = FeatureSpec {
            kind: FeatureKind::Raw,
            order: 0,
            coupling: Coupling::Decoupled,
            inputs,
            bounds,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.bounds.len() {
            return Err(Error::dimension("feature bounds", self.inputs.len(), self.bounds.len()));
        }
        validate_bounds(&self.bounds)?;
        if self.kind == FeatureKind::Fourier && self.coupling == Coupling::Full {
            let count = (self.order as u128 + 1).checked_pow(self.inputs.len() as u32);
            if count.is_none_or(|c| c > 1 << 20) {
                return Err(Error::Config("fully coupled Fourier basis is too large".into()));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.inputs.len()
    }

    pub fn len(&self) -> usize {
        let d = self.dims();
        match (self.kind, self.coupling) {
            (FeatureKind::Raw, _) => 1 + d,
            (FeatureKind::Fourier, Coupling::Decoupled) => 1 + self.order as usize * d,
            (FeatureKind::Fourier, Coupling::Full) => (self.order as usize + 1).pow(d as u32),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Normalised inputs in `[0, 1]`.
    pub fn normalized(&self, z: &AugmentedState) -> Result<Vec<f64>> {
        self.inputs
            .iter()
            .zip(&self.bounds)
            .map(|(input, &bounds)| Ok(normalize(input.read(z)?, bounds)))
            .collect()
    }

    pub fn project(&self, z: &AugmentedState) -> Result<Vec<f64>> {
        let s = self.normalized(z)?;
        Ok(self.project_normalized(&s))
    }

    pub fn project_normalized(&self, s: &[f64]) -> Vec<f64> {
        match (self.kind, self.coupling) {
            (FeatureKind::Raw, _) => std::iter::once(1.0).chain(s.iter().copied()).collect(),
            (FeatureKind::Fourier, Coupling::Decoupled) => {
                let mut out = Vec::with_capacity(self.len());
                out.push(1.0);
                for &v in s {
                    for c in 1..=self.order {
                        out.push((PI * c as f64 * v).cos());
                    }
                }
                out
            }
            (FeatureKind::Fourier, Coupling::Full) => {
                let base = self.order as usize + 1;
                let mut coeffs = vec![0usize; s.len()];
                let mut out = Vec::with_capacity(self.len());
                loop {
                    let dot: f64 = coeffs.iter().zip(s).map(|(&c, &v)| c as f64 * v).sum();
                    out.push((PI * dot).cos());
                    // Odometer increment over {0..order}^d, first dimension fastest.
                    let mut i = 0;
                    loop {
                        if i == coeffs.len() {
                            return out;
                        }
                        coeffs[i] += 1;
                        if coeffs[i] < base {
                            break;
                        }
                        coeffs[i] = 0;
                        i += 1;
                    }
                }
            }
        }
    }
}

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("invalid feature bounds ({lo}, {hi})")));
        }
    }
    Ok(())
}

fn normalize(value: f64, (lo, hi): (f64, f64)) -> f64 {
    let s = (value - lo) / (hi - lo);
    if (0.0..=1.0).contains(&s) {
        s
    } else {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
        s.clamp(0.0, 1.0)
    }
}

pub fn fourier_features(z: &AugmentedState, spec: &FeatureSpec) -> Result<Vec<f64>> {
    spec.project(z)
}

/// Features of the risk-aware distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadFeatureSpec {
    /// `[1, x_agent, y_agent, w, dist_goal]`, each normalised to `[0, 1]`.
    Spatial {
        layout: SpatialLayout,
        w_bounds: (f64, f64),
        dist_bounds: (f64, f64),
    },
    /// `[1, s_1, ..., s_d]` over arbitrary inputs.
    Raw { inputs: Vec<Input>, bounds: Vec<(f64, f64)> },
}

impl RadFeatureSpec {
    /// Spatial features from an environment's layout. Fails when the
    /// environment does not expose agent and goal positions.
    pub fn spatial(layout: Option<SpatialLayout>, w_bounds: (f64, f64)) -> Result<Self> {
        let layout = layout.ok_or_else(|| {
            Error::Config("environment exposes no agent/goal layout for spatial RAD features".into())
        })?;
        let dx = layout.x_bounds.1 - layout.x_bounds.0;
        let dy = layout.y_bounds.1 - layout.y_bounds.0;
        let spec = RadFeatureSpec::Spatial {
            layout,
            w_bounds,
            dist_bounds: (0.0, dx.hypot(dy)),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RadFeatureSpec::Spatial {
                layout,
                w_bounds,
                dist_bounds,
            } => validate_bounds(&[layout.x_bounds, layout.y_bounds, *w_bounds, *dist_bounds]),
            RadFeatureSpec::Raw { inputs, bounds } => {
                if inputs.len() != bounds.len() {
                    return Err(Error::dimension("RAD feature bounds", inputs.len(), bounds.len()));
                }
                validate_bounds(bounds)
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RadFeatureSpec::Spatial { .. } => 5,
            RadFeatureSpec::Raw { inputs, .. } => 1 + inputs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn project(&self, z: &AugmentedState) -> Result<Vec<f64>> {
        match self {
            RadFeatureSpec::Spatial {
                layout,
                w_bounds,
                dist_bounds,
            } => {
                let x = Input::Env(layout.agent_x).read(z)?;
                let y = Input::Env(layout.agent_y).read(z)?;
                let dist = (x - layout.goal.0).hypot(y - layout.goal.1);
                Ok(vec![
                    1.0,
                    normalize(x, layout.x_bounds),
                    normalize(y, layout.y_bounds),
                    normalize(z.w, *w_bounds),
                    normalize(dist, *dist_bounds),
                ])
            }
            RadFeatureSpec::Raw { inputs, bounds } => {
                let mut out = Vec::with_capacity(1 + inputs.len());
                out.push(1.0);
                for (input, &b) in inputs.iter().zip(bounds) {
                    out.push(normalize(input.read(z)?, b));
                }
                Ok(out)
            }
        }
    }
}

pub fn rad_features(z: &AugmentedState, spec: &RadFeatureSpec) -> Result<Vec<f64>> {
    spec.project(z)
}
