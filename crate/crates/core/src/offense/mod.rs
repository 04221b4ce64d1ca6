//! Striker-versus-keeper soccer offense on the half field `[0, 1]^2`.
//!
//! `x = 0` is the halfway line and the goal mouth is centred at `(1, 0.5)`.
//! The striker picks among three risk-aware skills: Move (to the ball, or
//! idle on it), Shoot, and Dribble, whose RAP is the kick power in
//! `[0, 150]`. A scripted keeper patrols its line and charges loose balls
//! close to goal. Episodes end with a goal, a keeper capture, or a timeout.
//!
//! Shot success probability is
//! `sigmoid(bias - distance_coef * d - block_coef * block)`, where `d` is the
//! ball's distance to the goal centre and `block` in `[0, 1]` is how squarely
//! the keeper covers the shot line (`1 - perp / block_width`, floored at 0).

mod keeper;
mod metrics;
mod setup;

pub use keeper::{keeper_policy, KeeperConfig};
pub use setup::PolicySetup;
pub use metrics::{metrics_collect, write_metrics, MetricsRecord, MetricsSummary, METRICS_SCHEMA_VERSION};

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::smdp::{EnvState, Environment, SkillOutcome, SpatialLayout, Trajectory};

pub const GOAL: (f64, f64) = (1.0, 0.5);
pub const RAP_MAX: f64 = 150.0;
/// Observation layout: striker, ball, keeper positions, then the score.
pub const STATE_DIM: usize = 8;
pub const EVENT_GOAL: &str = "goal";
pub const EVENT_CAPTURE: &str = "capture";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Winning,
    Losing,
}

impl Scenario {
    pub fn score(self) -> (u32, u32) {
        match self {
            Scenario::Winning => (1, 0),
            Scenario::Losing => (0, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Winning => "winning",
            Scenario::Losing => "losing",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "winning" => Ok(Scenario::Winning),
            "losing" => Ok(Scenario::Losing),
            other => Err(Error::Config(format!("unknown scenario {other:?} (expected winning or losing)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkillId {
    Move = 0,
    Shoot = 1,
    Dribble = 2,
}

impl SkillId {
    pub const ALL: [SkillId; 3] = [SkillId::Move, SkillId::Shoot, SkillId::Dribble];

    pub fn from_index(i: usize) -> Option<SkillId> {
        SkillId::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SkillId::Move => "move",
            SkillId::Shoot => "shoot",
            SkillId::Dribble => "dribble",
        }
    }
}

pub fn skill_names() -> Vec<String> {
    SkillId::ALL.iter().map(|s| s.name().to_string()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Possession {
    Striker,
    Keeper,
    Loose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub striker: (f64, f64),
    pub ball: (f64, f64),
    pub keeper: (f64, f64),
    pub score: (u32, u32),
    pub possession: Possession,
}

impl FieldState {
    pub fn observation(&self) -> EnvState {
        EnvState {
            features: vec![
                self.striker.0,
                self.striker.1,
                self.ball.0,
                self.ball.1,
                self.keeper.0,
                self.keeper.1,
                self.score.0 as f64,
                self.score.1 as f64,
            ],
        }
    }

    pub fn in_bounds(&self) -> bool {
        [self.striker, self.ball, self.keeper]
            .iter()
            .all(|&(x, y)| (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y))
    }

    pub fn ball_goal_distance(&self) -> f64 {
        dist(self.ball, GOAL)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardTable {
    pub r_move: f64,
    pub r_d_far: f64,
    pub r_d_near: f64,
    pub r_s_near: f64,
    pub r_s_far: f64,
    pub r_score_win: f64,
    pub r_score_lose: f64,
    pub goal_reward: f64,
    /// Ball-to-goal distance below which kicks count as "near".
    pub near_box_threshold: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        RewardTable {
            r_move: 0.002,
            r_d_far: 0.02,
            r_d_near: -0.02,
            r_s_near: 0.05,
            r_s_far: -0.05,
            r_score_win: 0.004,
            r_score_lose: -0.004,
            goal_reward: 1.0,
            near_box_threshold: 0.25,
        }
    }
}

impl RewardTable {
    /// Every sign violation, one message each.
    pub fn sign_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut need = |name: &str, v: f64, positive: bool| {
            if !v.is_finite() || (positive && v <= 0.0) || (!positive && v >= 0.0) {
                out.push(format!("rewards.{name} = {v} must be {}", if positive { "positive" } else { "negative" }));
            }
        };
        need("r_move", self.r_move, true);
        need("r_d_far", self.r_d_far, true);
        need("r_d_near", self.r_d_near, false);
        need("r_s_near", self.r_s_near, true);
        need("r_s_far", self.r_s_far, false);
        need("r_score_win", self.r_score_win, true);
        need("r_score_lose", self.r_score_lose, false);
        need("goal_reward", self.goal_reward, true);
        need("near_box_threshold", self.near_box_threshold, true);
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.sign_violations().first() {
            Some(msg) => Err(Error::Config(msg.clone())),
            None => Ok(()),
        }
    }

    /// Per-timestep game-score reward.
    pub fn score_reward(&self, scenario: Scenario) -> f64 {
        match scenario {
            Scenario::Winning => self.r_score_win,
            Scenario::Losing => self.r_score_lose,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShotModel {
    pub bias: f64,
    pub distance_coef: f64,
    pub block_coef: f64,
    pub block_width: f64,
    /// Ball speed in field units per timestep.
    pub speed: f64,
}

impl Default for ShotModel {
    fn default() -> Self {
        ShotModel {
            bias: 7.0,
            distance_coef: 20.0,
            block_coef: 1.0,
            block_width: 0.1,
            speed: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffenseConfig {
    pub scenario: Scenario,
    /// Striker speed in field units per timestep.
    pub striker_speed: f64,
    /// Ball displacement of a full-power (RAP 150) dribble.
    pub dribble_max: f64,
    /// RAP per extra timestep of ball travel: a dribble lasts
    /// `ceil(rap / dribble_rap_per_step) + 1` steps.
    pub dribble_rap_per_step: f64,
    /// Distance at which the striker controls the ball.
    pub control_radius: f64,
    pub start_x: f64,
    pub start_y: f64,
    pub start_jitter: f64,
    pub shot: ShotModel,
    pub keeper: KeeperConfig,
    pub rewards: RewardTable,
}

impl Default for OffenseConfig {
    fn default() -> Self {
        OffenseConfig {
            scenario: Scenario::Losing,
            striker_speed: 0.025,
            dribble_max: 0.15,
            dribble_rap_per_step: 30.0,
            control_radius: 0.02,
            start_x: 0.05,
            start_y: 0.5,
            start_jitter: 0.03,
            shot: ShotModel::default(),
            keeper: KeeperConfig::default(),
            rewards: RewardTable::default(),
        }
    }
}

impl OffenseConfig {
    pub fn with_scenario(scenario: Scenario) -> Self {
        OffenseConfig {
            scenario,
            ..OffenseConfig::default()
        }
    }

    /// Every problem with the configuration, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.rewards.sign_violations();
        let positive = [
            ("env.striker_speed", self.striker_speed),
            ("env.dribble_max", self.dribble_max),
            ("env.dribble_rap_per_step", self.dribble_rap_per_step),
            ("env.control_radius", self.control_radius),
            ("env.shot.speed", self.shot.speed),
            ("env.shot.block_width", self.shot.block_width),
            ("env.keeper.reach", self.keeper.reach),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} = {v} must be positive"));
            }
        }
        if !(self.keeper.speed >= 0.0) {
            out.push(format!("env.keeper.speed = {} must be nonnegative", self.keeper.speed));
        }
        if !(self.keeper.patrol.0 <= self.keeper.patrol.1) {
            out.push("env.keeper.patrol must satisfy lower <= upper".into());
        }
        for (name, v) in [("env.start_x", self.start_x), ("env.start_y", self.start_y), ("env.keeper.line_x", self.keeper.line_x)] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{name} = {v} must lie in [0, 1]"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().first() {
            Some(msg) => Err(Error::Config(msg.clone())),
            None => Ok(()),
        }
    }

    /// Timesteps a dribble with power `rap` lasts.
    pub fn dribble_steps(&self, rap: f64) -> u32 {
        (rap.max(0.0) / self.dribble_rap_per_step).ceil() as u32 + 1
    }

    pub fn goal_probability(&self, ball: (f64, f64), keeper: (f64, f64)) -> f64 {
        let d = dist(ball, GOAL);
        let block = shot_block(ball, keeper, self.shot.block_width);
        sigmoid(self.shot.bias - self.shot.distance_coef * d - self.shot.block_coef * block)
    }
}

pub(crate) fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn clamp_field(p: (f64, f64)) -> (f64, f64) {
    (p.0.clamp(0.0, 1.0), p.1.clamp(0.0, 1.0))
}

/// Step from `from` toward `to` by at most `max_step`.
pub(crate) fn approach(from: (f64, f64), to: (f64, f64), max_step: f64) -> (f64, f64) {
    let d = dist(from, to);
    if d <= max_step || d == 0.0 {
        to
    } else {
        let f = max_step / d;
        (from.0 + (to.0 - from.0) * f, from.1 + (to.1 - from.1) * f)
    }
}

/// Keeper coverage of the straight shot from `ball` to the goal centre.
fn shot_block(ball: (f64, f64), keeper: (f64, f64), width: f64) -> f64 {
    let (dx, dy) = (GOAL.0 - ball.0, GOAL.1 - ball.1);
    let len2 = dx * dx + dy * dy;
    let perp = if len2 == 0.0 {
        dist(keeper, ball)
    } else {
        let s = (((keeper.0 - ball.0) * dx + (keeper.1 - ball.1) * dy) / len2).clamp(0.0, 1.0);
        dist(keeper, (ball.0 + s * dx, ball.1 + s * dy))
    };
    (1.0 - perp / width).max(0.0)
}

/// Initial field for a scenario: striker near the halfway line with the
/// ball at its feet, keeper centred on its line.
pub fn scenario_init(cfg: &OffenseConfig, kind: Scenario, rng: &mut RandomSource) -> FieldState {
    let j = cfg.start_jitter;
    let mut jitter = |c: f64| if j > 0.0 { c + rng.random_range(-j..=j) } else { c };
    let striker = clamp_field((jitter(cfg.start_x), jitter(cfg.start_y)));
    FieldState {
        striker,
        ball: striker,
        keeper: (cfg.keeper.line_x, 0.5_f64.clamp(cfg.keeper.patrol.0, cfg.keeper.patrol.1)),
        score: kind.score(),
        possession: Possession::Striker,
    }
}

/// What one skill execution did, before the shaped reward is attached.
#[derive(Clone, Debug, PartialEq)]
pub struct SkillEffect {
    pub skill: SkillId,
    pub steps: u32,
    /// Ball-to-goal distance when the skill started.
    pub start_distance: f64,
    pub rap: f64,
    pub goal: bool,
    pub capture: bool,
    /// Ball displacement produced by the skill.
    pub ball_displacement: f64,
}

/// Shaped reward of one skill execution, including the per-timestep game
/// score term.
pub fn shaped_reward(rewards: &RewardTable, scenario: Scenario, effect: &SkillEffect) -> f64 {
    let near = effect.start_distance < rewards.near_box_threshold;
    let skill = match effect.skill {
        SkillId::Move => rewards.r_move,
        SkillId::Dribble if effect.rap > 0.0 => {
            if near {
                rewards.r_d_near
            } else {
                rewards.r_d_far
            }
        }
        SkillId::Dribble => 0.0,
        SkillId::Shoot => {
            let kick = if near { rewards.r_s_near } else { rewards.r_s_far };
            kick + if effect.goal { rewards.goal_reward } else { 0.0 }
        }
    };
    skill + rewards.score_reward(scenario) * effect.steps as f64
}

/// One position snapshot per timestep, for trace export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: u32,
    pub striker: (f64, f64),
    pub ball: (f64, f64),
    pub keeper: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct MiniOffense {
    cfg: OffenseConfig,
    state: FieldState,
    t: u32,
    fallbacks: u64,
    record: bool,
    frames: Vec<Frame>,
}

impl MiniOffense {
    pub fn new(cfg: OffenseConfig) -> Result<Self> {
        cfg.validate()?;
        let state = FieldState {
            striker: (cfg.start_x, cfg.start_y),
            ball: (cfg.start_x, cfg.start_y),
            keeper: (cfg.keeper.line_x, 0.5),
            score: cfg.scenario.score(),
            possession: Possession::Striker,
        };
        Ok(MiniOffense {
            cfg,
            state,
            t: 0,
            fallbacks: 0,
            record: false,
            frames: Vec::new(),
        })
    }

    pub fn config(&self) -> &OffenseConfig {
        &self.cfg
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn set_state(&mut self, state: FieldState) {
        self.state = state;
    }

    /// Decisions where the chosen skill was not initiable and Move ran instead.
    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    /// Keep a per-timestep position log from the next reset on.
    pub fn record_frames(&mut self, on: bool) {
        self.record = on;
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    fn has_ball(&self) -> bool {
        self.state.possession == Possession::Striker
            || (self.state.possession == Possession::Loose && dist(self.state.striker, self.state.ball) <= self.cfg.control_radius)
    }

    /// Advance the keeper by one timestep and check for a capture.
    fn tick(&mut self, rng: &mut RandomSource) -> bool {
        self.state.keeper = keeper_policy(&self.cfg.keeper, &self.state, rng);
        self.t += 1;
        if self.record {
            self.frames.push(Frame {
                t: self.t,
                striker: self.state.striker,
                ball: self.state.ball,
                keeper: self.state.keeper,
            });
        }
        if dist(self.state.keeper, self.state.ball) < self.cfg.keeper.reach {
            self.state.possession = Possession::Keeper;
            self.state.ball = self.state.keeper;
            return true;
        }
        false
    }

    /// Run a skill against the field and report its effect.
    pub fn skill_execute(&mut self, skill: SkillId, rap: f64, max_steps: u32, rng: &mut RandomSource) -> Result<SkillEffect> {
        if max_steps == 0 {
            return Err(Error::Contract("no timesteps left for a skill".into()));
        }
        if self.state.possession == Possession::Keeper {
            return Err(Error::Contract("the keeper already holds the ball".into()));
        }
        let skill = if skill != SkillId::Move && !self.has_ball() {
            self.fallbacks += 1;
            SkillId::Move
        } else {
            skill
        };
        let start_ball = self.state.ball;
        let mut effect = SkillEffect {
            skill,
            steps: 0,
            start_distance: dist(start_ball, GOAL),
            rap,
            goal: false,
            capture: false,
            ball_displacement: 0.0,
        };
        match skill {
            SkillId::Move => {
                if !self.has_ball() {
                    self.state.striker = approach(self.state.striker, self.state.ball, self.cfg.striker_speed);
                    if dist(self.state.striker, self.state.ball) <= self.cfg.control_radius {
                        self.state.striker = self.state.ball;
                        self.state.possession = Possession::Striker;
                    }
                }
                effect.steps = 1;
                effect.capture = self.tick(rng);
            }
            SkillId::Dribble => {
                let rap = rap.clamp(0.0, RAP_MAX);
                let displacement = self.cfg.dribble_max * rap / RAP_MAX;
                let target = dribble_target(start_ball, displacement);
                let full = self.cfg.dribble_steps(rap);
                let kick_steps = full - 1;
                let chase = self.cfg.striker_speed.max(self.cfg.dribble_max / (self.cfg.dribble_steps(RAP_MAX) - 1) as f64);
                if displacement > 0.0 {
                    self.state.possession = Possession::Loose;
                }
                for s in 1..=full.min(max_steps) {
                    if kick_steps > 0 {
                        let frac = (s as f64 / kick_steps as f64).min(1.0);
                        self.state.ball = (
                            start_ball.0 + (target.0 - start_ball.0) * frac,
                            start_ball.1 + (target.1 - start_ball.1) * frac,
                        );
                    }
                    self.state.striker = approach(self.state.striker, self.state.ball, chase);
                    effect.steps = s;
                    if self.tick(rng) {
                        effect.capture = true;
                        break;
                    }
                }
                if !effect.capture && effect.steps == full {
                    self.state.striker = self.state.ball;
                    self.state.possession = Possession::Striker;
                }
                effect.ball_displacement = dist(start_ball, self.state.ball);
            }
            SkillId::Shoot => {
                let flight = ((effect.start_distance / self.cfg.shot.speed).ceil() as u32).clamp(1, max_steps);
                let p = self.cfg.goal_probability(start_ball, self.state.keeper);
                self.state.possession = Possession::Loose;
                for s in 1..=flight {
                    let frac = s as f64 / flight as f64;
                    self.state.ball = (start_ball.0 + (GOAL.0 - start_ball.0) * frac, start_ball.1 + (GOAL.1 - start_ball.1) * frac);
                    self.state.keeper = keeper_policy(&self.cfg.keeper, &self.state, rng);
                    self.t += 1;
                    if self.record {
                        self.frames.push(Frame {
                            t: self.t,
                            striker: self.state.striker,
                            ball: self.state.ball,
                            keeper: self.state.keeper,
                        });
                    }
                }
                effect.steps = flight;
                effect.ball_displacement = dist(start_ball, self.state.ball);
                if rng.random::<f64>() < p {
                    effect.goal = true;
                    self.state.score.0 += 1;
                } else {
                    effect.capture = true;
                    self.state.possession = Possession::Keeper;
                    self.state.ball = self.state.keeper;
                }
            }
        }
        debug_assert!(self.state.in_bounds());
        Ok(effect)
    }
}

/// Where a dribble of length `displacement` toward the goal leaves the
/// ball. The ball stops short of the goal line.
fn dribble_target(ball: (f64, f64), displacement: f64) -> (f64, f64) {
    let d = dist(ball, GOAL);
    if d == 0.0 || displacement == 0.0 {
        return ball;
    }
    let travel = displacement.min((d - 0.02).max(0.0));
    let f = travel / d;
    clamp_field((ball.0 + (GOAL.0 - ball.0) * f, ball.1 + (GOAL.1 - ball.1) * f))
}

impl Environment for MiniOffense {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn num_skills(&self) -> usize {
        SkillId::ALL.len()
    }

    fn reset(&mut self, rng: &mut RandomSource) -> EnvState {
        self.state = scenario_init(&self.cfg, self.cfg.scenario, rng);
        self.t = 0;
        self.frames.clear();
        if self.record {
            self.frames.push(Frame {
                t: 0,
                striker: self.state.striker,
                ball: self.state.ball,
                keeper: self.state.keeper,
            });
        }
        self.state.observation()
    }

    fn execute(&mut self, skill: usize, rap: f64, max_steps: u32, rng: &mut RandomSource) -> Result<SkillOutcome> {
        let id = SkillId::from_index(skill).ok_or_else(|| Error::Validation(format!("unknown skill index {skill}")))?;
        let effect = self.skill_execute(id, rap, max_steps, rng)?;
        let reward = shaped_reward(&self.cfg.rewards, self.cfg.scenario, &effect);
        let terminal = if effect.goal {
            Some(EVENT_GOAL.to_string())
        } else if effect.capture {
            Some(EVENT_CAPTURE.to_string())
        } else {
            None
        };
        Ok(SkillOutcome {
            steps: effect.steps,
            reward,
            next: self.state.observation(),
            terminal,
        })
    }

    fn spatial_layout(&self) -> Option<SpatialLayout> {
        Some(SpatialLayout {
            agent_x: 0,
            agent_y: 1,
            goal: GOAL,
            x_bounds: (0.0, 1.0),
            y_bounds: (0.0, 1.0),
        })
    }
}

/// Trace export: the trajectory dump lines followed by one position frame
/// per timestep, each prefixed by its record kind.
pub fn write_trace<W: Write>(trajectory: &Trajectory, frames: &[Frame], mut out: W) -> Result<()> {
    let mut records = Vec::new();
    crate::smdp::dump_trajectory(trajectory, &mut records)?;
    for line in String::from_utf8_lossy(&records).lines() {
        writeln!(out, "decision {line}")?;
    }
    for f in frames {
        writeln!(out, "frame {}", serde_json::to_string(f)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
