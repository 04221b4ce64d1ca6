//! Scripted goalkeeper.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{approach, dist, FieldState, Possession, GOAL};
use crate::rng::RandomSource;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeeperConfig {
    /// Field units per timestep (0.6x the striker by default).
    pub speed: f64,
    /// Ball within this distance of the keeper is captured.
    pub reach: f64,
    /// x coordinate of the keeper's line.
    pub line_x: f64,
    /// y range the keeper patrols on its line.
    pub patrol: (f64, f64),
    /// The keeper leaves its line for a ball this close to the goal centre.
    pub charge_radius: f64,
    /// Standard deviation of the keeper's aim on its line.
    pub noise: f64,
}

impl Default for KeeperConfig {
    fn default() -> Self {
        KeeperConfig {
            speed: 0.015,
            reach: 0.05,
            line_x: 0.95,
            patrol: (0.42, 0.58),
            charge_radius: 0.12,
            noise: 0.005,
        }
    }
}

/// Next keeper position: charge a nearby ball, otherwise shadow the ball's
/// y on the keeper line, clamped to the patrol segment.
pub fn keeper_policy(cfg: &KeeperConfig, state: &FieldState, rng: &mut RandomSource) -> (f64, f64) {
    let charging = state.possession != Possession::Keeper && dist(state.ball, GOAL) < cfg.charge_radius;
    let target = if charging {
        state.ball
    } else {
        let jitter = match Normal::new(0.0, cfg.noise) {
            Ok(n) if cfg.noise > 0.0 => n.sample(rng),
            _ => 0.0,
        };
        (cfg.line_x, (state.ball.1 + jitter).clamp(cfg.patrol.0, cfg.patrol.1))
    };
    let next = approach(state.keeper, target, cfg.speed);
    (next.0.clamp(0.0, 1.0), next.1.clamp(0.0, 1.0))
}
