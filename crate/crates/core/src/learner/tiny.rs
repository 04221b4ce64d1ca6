//! Tiny enumerable PG-SMDPs and the exact-gradient oracle.
//!
//! The RAP support is split into at most three bins by fixed cut points;
//! transitions and rewards depend on the bin the executed RAP lands in. The
//! exact objective `J = sum_tau P(tau) R(tau)` is computed by enumerating every
//! (skill, bin, next state) sequence, and its gradient by the likelihood-ratio
//! identity `sum_tau P(tau) R(tau) grad log P(tau)` with the bin probabilities
//! differentiated through the Gaussian CDF.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::policy::{dot, inter_skill_probs, FeatureSpec, Input, InterSkillParams, RadFeatureSpec, RadParams, TwoTieredPolicy};
use crate::rng::RandomSource;
use crate::smdp::{augmented_reward, trajectory::discount, EnvState, Environment, EpisodeConfig, RewardMode, SkillOutcome};

/// Upper bound on enumerated trajectories.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TinyMdpFixture {
    pub num_states: usize,
    pub num_skills: usize,
    /// Increasing cut points; `cuts.len() + 1` RAP bins.
    pub rap_cuts: Vec<f64>,
    pub horizon: u32,
    pub initial: Vec<f64>,
    /// `P(s' | s, skill, bin)`, indexed `[s][skill][bin][s']`.
    pub transitions: Vec<f64>,
    /// `r(s, skill, bin)`, indexed `[s][skill][bin]`.
    pub rewards: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub reward_mode: RewardMode,
}

impl TinyMdpFixture {
    pub fn bins(&self) -> usize {
        self.rap_cuts.len() + 1
    }

    fn tidx(&self, s: usize, a: usize, b: usize, s2: usize) -> usize {
        ((s * self.num_skills + a) * self.bins() + b) * self.num_states + s2
    }

    fn ridx(&self, s: usize, a: usize, b: usize) -> usize {
        (s * self.num_skills + a) * self.bins() + b
    }

    pub fn transition(&self, s: usize, skill: usize, bin: usize, next: usize) -> f64 {
        self.transitions[self.tidx(s, skill, bin, next)]
    }

    pub fn reward(&self, s: usize, skill: usize, bin: usize) -> f64 {
        self.rewards[self.ridx(s, skill, bin)]
    }

    pub fn bin_of(&self, rap: f64) -> usize {
        self.rap_cuts.iter().take_while(|&&c| rap >= c).count()
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            horizon: self.horizon,
            beta: self.beta,
            gamma: self.gamma,
            reward_mode: self.reward_mode,
        }
    }

    /// Number of (skill, bin, next-state) sequences times initial states.
    pub fn trajectory_count(&self) -> u128 {
        let branching = (self.num_skills * self.bins() * self.num_states) as u128;
        let starts = self.initial.iter().filter(|&&p| p > 0.0).count() as u128;
        branching.saturating_pow(self.horizon).saturating_mul(starts)
    }

    pub fn validate(&self) -> Result<()> {
        let sz = self.num_states * self.num_skills * self.bins();
        if self.transitions.len() != sz * self.num_states {
            return Err(Error::dimension("transition table", sz * self.num_states, self.transitions.len()));
        }
        if self.rewards.len() != sz {
            return Err(Error::dimension("reward table", sz, self.rewards.len()));
        }
        if self.initial.len() != self.num_states {
            return Err(Error::dimension("initial distribution", self.num_states, self.initial.len()));
        }
        if self.rap_cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("RAP cut points must increase".into()));
        }
        let rows = std::iter::once(&self.initial[..]).chain(self.transitions.chunks(self.num_states));
        for row in rows {
            if row.iter().any(|&p| p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::Validation("probability row does not sum to one".into()));
            }
        }
        Ok(())
    }

    /// Two states, two skills, three RAP bins, horizon three.
    ///
    /// Skill 0 is safe with a small reward that grows with the RAP bin; skill
    /// 1 gambles on reaching the rewarding state 1.
    pub fn two_state(reward_mode: RewardMode) -> Self {
        let num_states = 2;
        let num_skills = 2;
        let bins = 3;
        let mut transitions = vec![0.0; num_states * num_skills * bins * num_states];
        let mut rewards = vec![0.0; num_states * num_skills * bins];
        let mut f = TinyMdpFixture {
            num_states,
            num_skills,
            rap_cuts: vec![-0.5, 0.5],
            horizon: 3,
            initial: vec![0.7, 0.3],
            transitions: Vec::new(),
            rewards: Vec::new(),
            beta: 1.0,
            gamma: if reward_mode == RewardMode::ExpectedReturn { 0.9 } else { 1.0 },
            reward_mode,
        };
        for s in 0..num_states {
            for b in 0..bins {
                // skill 0: stay, reward 0.1 * (bin + 1)
                let base = ((s * num_skills) * bins + b) * num_states;
                transitions[base + s] = 1.0;
                rewards[(s * num_skills) * bins + b] = 0.1 * (b as f64 + 1.0) + 0.05 * s as f64;
                // skill 1: move to state 1 with a bin-dependent chance
                let base = ((s * num_skills + 1) * bins + b) * num_states;
                let p_up = [0.2, 0.5, 0.8][b];
                transitions[base + 1] = p_up;
                transitions[base] = 1.0 - p_up;
                rewards[(s * num_skills + 1) * bins + b] = if s == 1 { 0.6 } else { -0.1 * b as f64 };
            }
        }
        f.transitions = transitions;
        f.rewards = rewards;
        f
    }

    /// Four states, two skills, three bins, horizon four, with random tables.
    /// Episodes start in state 0 so the enumeration stays under the limit.
    pub fn random(rng: &mut RandomSource, reward_mode: RewardMode) -> Self {
        let num_states = 4;
        let num_skills = 2;
        let bins = 3;
        let mut transitions = Vec::with_capacity(num_states * num_skills * bins * num_states);
        for _ in 0..num_states * num_skills * bins {
            let raw: Vec<f64> = (0..num_states).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw.iter().map(|v| v / total).collect();
            // Renormalise the last entry so the row sums to one exactly.
            let head: f64 = row[..num_states - 1].iter().sum();
            row[num_states - 1] = 1.0 - head;
            transitions.extend(row);
        }
        let rewards = (0..num_states * num_skills * bins).map(|_| rng.random_range(-0.5..1.0)).collect();
        TinyMdpFixture {
            num_states,
            num_skills,
            rap_cuts: vec![-0.5, 0.5],
            horizon: 4,
            initial: vec![1.0, 0.0, 0.0, 0.0],
            transitions,
            rewards,
            beta: 1.0,
            gamma: if reward_mode == RewardMode::ExpectedReturn { 0.95 } else { 1.0 },
            reward_mode,
        }
    }

    /// Skill 1 earns reward 1 per step, skill 0 earns nothing.
    pub fn dominant_skill() -> Self {
        let bins = 3;
        let mut rewards = Vec::new();
        let mut transitions = Vec::new();
        for _s in 0..2 {
            for a in 0..2 {
                for _b in 0..bins {
                    rewards.push(if a == 1 { 1.0 } else { 0.0 });
                    transitions.extend([0.5, 0.5]);
                }
            }
        }
        TinyMdpFixture {
            num_states: 2,
            num_skills: 2,
            rap_cuts: vec![-0.5, 0.5],
            horizon: 4,
            initial: vec![0.5, 0.5],
            transitions,
            rewards,
            beta: 1.0,
            gamma: 1.0,
            reward_mode: RewardMode::ExpectedReturn,
        }
    }

    pub fn with_rewards_scaled(&self, factor: f64) -> Self {
        let mut f = self.clone();
        for r in &mut f.rewards {
            *r *= factor;
        }
        f
    }

    /// Policy over raw features `[1, s, w]` with matching RAD features.
    pub fn policy(&self, alpha: Matrix, omega: Matrix, variance: f64) -> Result<TwoTieredPolicy> {
        let s_max = (self.num_states.max(2) - 1) as f64;
        let w_span = self.rewards.iter().fold(0.0_f64, |m, r| m.max(r.abs())) * self.horizon as f64;
        let inputs = vec![Input::Env(0), Input::W];
        let bounds = vec![(0.0, s_max), (-w_span - 1.0, w_span + 1.0)];
        TwoTieredPolicy::new(
            InterSkillParams { alpha },
            RadParams { omega, variance },
            FeatureSpec::raw(inputs.clone(), bounds.clone())?,
            RadFeatureSpec::Raw { inputs, bounds },
            (-1e9, 1e9),
            (0..self.num_skills).map(|i| format!("skill{i}")).collect(),
            1,
        )
    }

    /// Random policy parameters of the right shape for [`TinyMdpFixture::policy`].
    pub fn random_policy(&self, rng: &mut RandomSource) -> Result<TwoTieredPolicy> {
        let mut alpha = Matrix::zeros(self.num_skills, 3);
        let mut omega = Matrix::zeros(self.num_skills, 3);
        for v in alpha.as_mut_slice() {
            *v = rng.random_range(-1.5..1.5);
        }
        for v in omega.as_mut_slice() {
            *v = rng.random_range(-1.0..1.0);
        }
        self.policy(alpha, omega, 1.0)
    }

    pub fn env(&self) -> Result<TinyMdp> {
        self.validate()?;
        Ok(TinyMdp {
            fixture: self.clone(),
            state: 0,
        })
    }
}

/// Sampling environment backed by a [`TinyMdpFixture`]. Every skill lasts
/// one timestep.
#[derive(Clone, Debug)]
pub struct TinyMdp {
    fixture: TinyMdpFixture,
    state: usize,
}

fn sample_index(probs: &[f64], rng: &mut RandomSource) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

impl Environment for TinyMdp {
    fn state_dim(&self) -> usize {
        1
    }

    fn num_skills(&self) -> usize {
        self.fixture.num_skills
    }

    fn reset(&mut self, rng: &mut RandomSource) -> EnvState {
        self.state = sample_index(&self.fixture.initial, rng);
        EnvState {
            features: vec![self.state as f64],
        }
    }

    fn execute(&mut self, skill: usize, rap: f64, _max_steps: u32, rng: &mut RandomSource) -> Result<SkillOutcome> {
        let f = &self.fixture;
        if skill >= f.num_skills {
            return Err(Error::Validation(format!("unknown skill {skill}")));
        }
        let bin = f.bin_of(rap);
        let start = f.tidx(self.state, skill, bin, 0);
        let next = sample_index(&f.transitions[start..start + f.num_states], rng);
        let reward = f.reward(self.state, skill, bin);
        self.state = next;
        Ok(SkillOutcome {
            steps: 1,
            reward,
            next: EnvState {
                features: vec![next as f64],
            },
            terminal: None,
        })
    }
}

/// Exact objective and gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactGradient {
    pub objective: f64,
    pub grad_alpha: Matrix,
    pub grad_omega: Matrix,
    pub trajectories: u64,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Probability of each RAP bin under `N(mean, variance)` and the derivative
/// of that probability with respect to the mean.
fn bin_probabilities(cuts: &[f64], mean: f64, variance: f64) -> Vec<(f64, f64)> {
    let sd = variance.sqrt();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend_from_slice(cuts);
    edges.push(f64::INFINITY);
    edges
        .windows(2)
        .map(|e| {
            let (lo, hi) = ((e[0] - mean) / sd, (e[1] - mean) / sd);
            let (c_lo, d_lo) = if lo.is_finite() { (std_normal_cdf(lo), std_normal_pdf(lo)) } else { (0.0, 0.0) };
            let (c_hi, d_hi) = if hi.is_finite() { (std_normal_cdf(hi), std_normal_pdf(hi)) } else { (1.0, 0.0) };
            (c_hi - c_lo, (d_lo - d_hi) / sd)
        })
        .collect()
}

struct Walker<'a> {
    fixture: &'a TinyMdpFixture,
    policy: &'a TwoTieredPolicy,
    with_gradient: bool,
    objective: f64,
    /// Neumaier compensation term for `objective`.
    carry: f64,
    grad_alpha: Matrix,
    grad_omega: Matrix,
    count: u64,
}

impl Walker<'_> {
    #[allow(clippy::too_many_arguments)]
    fn visit(&mut self, s: usize, t: u32, w: f64, prob: f64, ret: f64, g_alpha: &Matrix, g_omega: &Matrix) -> Result<()> {
        let f = self.fixture;
        if t == f.horizon {
            self.count += 1;
            let term = prob * ret;
            let sum = self.objective + term;
            self.carry += if self.objective.abs() >= term.abs() {
                (self.objective - sum) + term
            } else {
                (term - sum) + self.objective
            };
            self.objective = sum;
            if self.with_gradient {
                self.grad_alpha.add_scaled(g_alpha, prob * ret);
                self.grad_omega.add_scaled(g_omega, prob * ret);
            }
            return Ok(());
        }
        let z = crate::smdp::AugmentedState {
            env: EnvState {
                features: vec![s as f64],
            },
            w,
            t,
        };
        let phi = self.policy.inter_features(&z)?;
        let psi = self.policy.rad_features(&z)?;
        let probs = inter_skill_probs(&self.policy.inter.alpha, &phi)?;
        for (a, &p_a) in probs.iter().enumerate() {
            let mean = dot(self.policy.rad.omega.row(a), &psi);
            let bins = bin_probabilities(&f.rap_cuts, mean, self.policy.rad.variance);
            for (b, &(p_b, dp_b)) in bins.iter().enumerate() {
                if p_b <= 0.0 {
                    continue;
                }
                let r = f.reward(s, a, b);
                let w_next = w + r;
                let step_reward = match f.reward_mode {
                    RewardMode::ExpectedReturn => r,
                    RewardMode::ProbabilisticGoal => augmented_reward(t + 1, f.horizon, w_next, f.beta)?,
                };
                let ret_next = ret + discount(f.gamma, t) * step_reward;
                let (ga, go) = if self.with_gradient {
                    let mut ga = g_alpha.clone();
                    for (i, &p_i) in probs.iter().enumerate() {
                        let coef = if i == a { 1.0 - p_i } else { -p_i };
                        for (g, x) in ga.row_mut(i).iter_mut().zip(&phi) {
                            *g += coef * x;
                        }
                    }
                    let mut go = g_omega.clone();
                    let score = dp_b / p_b;
                    for (g, x) in go.row_mut(a).iter_mut().zip(&psi) {
                        *g += score * x;
                    }
                    (ga, go)
                } else {
                    (g_alpha.clone(), g_omega.clone())
                };
                for s2 in 0..f.num_states {
                    let p_s2 = f.transition(s, a, b, s2);
                    if p_s2 == 0.0 {
                        continue;
                    }
                    self.visit(s2, t + 1, w_next, prob * p_a * p_b * p_s2, ret_next, &ga, &go)?;
                }
            }
        }
        Ok(())
    }
}

fn enumerate(fixture: &TinyMdpFixture, policy: &TwoTieredPolicy, with_gradient: bool) -> Result<ExactGradient> {
    fixture.validate()?;
    let count = fixture.trajectory_count();
    if count > ENUMERATION_LIMIT {
        return Err(Error::FixtureTooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    policy.check_environment(1, fixture.num_skills)?;
    let zeros_a = Matrix::zeros(policy.inter.alpha.rows(), policy.inter.alpha.cols());
    let zeros_o = Matrix::zeros(policy.rad.omega.rows(), policy.rad.omega.cols());
    let mut walker = Walker {
        fixture,
        policy,
        with_gradient,
        objective: 0.0,
        carry: 0.0,
        grad_alpha: zeros_a.clone(),
        grad_omega: zeros_o.clone(),
        count: 0,
    };
    for (s, &p0) in fixture.initial.iter().enumerate() {
        if p0 > 0.0 {
            walker.visit(s, 0, 0.0, p0, 0.0, &zeros_a, &zeros_o)?;
        }
    }
    Ok(ExactGradient {
        objective: walker.objective + walker.carry,
        grad_alpha: walker.grad_alpha,
        grad_omega: walker.grad_omega,
        trajectories: walker.count,
    })
}

/// `J = sum_tau P(tau) R(tau)` by enumeration.
pub fn exact_objective(fixture: &TinyMdpFixture, policy: &TwoTieredPolicy) -> Result<f64> {
    Ok(enumerate(fixture, policy, false)?.objective)
}

/// Exact `(grad_alpha J, grad_Omega J)` by enumerating every trajectory.
pub fn brute_force_gradient(fixture: &TinyMdpFixture, policy: &TwoTieredPolicy) -> Result<ExactGradient> {
    enumerate(fixture, policy, true)
}

/// Central finite differences of the enumerated objective.
pub fn finite_difference_gradient(fixture: &TinyMdpFixture, policy: &TwoTieredPolicy, h: f64) -> Result<(Matrix, Matrix)> {
    let mut grad_alpha = Matrix::zeros(policy.inter.alpha.rows(), policy.inter.alpha.cols());
    let mut grad_omega = Matrix::zeros(policy.rad.omega.rows(), policy.rad.omega.cols());
    for k in 0..grad_alpha.len() {
        let mut plus = policy.clone();
        plus.inter.alpha.as_mut_slice()[k] += h;
        let mut minus = policy.clone();
        minus.inter.alpha.as_mut_slice()[k] -= h;
        grad_alpha.as_mut_slice()[k] = (exact_objective(fixture, &plus)? - exact_objective(fixture, &minus)?) / (2.0 * h);
    }
    for k in 0..grad_omega.len() {
        let mut plus = policy.clone();
        plus.rad.omega.as_mut_slice()[k] += h;
        let mut minus = policy.clone();
        minus.rad.omega.as_mut_slice()[k] -= h;
        grad_omega.as_mut_slice()[k] = (exact_objective(fixture, &plus)? - exact_objective(fixture, &minus)?) / (2.0 * h);
    }
    Ok((grad_alpha, grad_omega))
}

/// `|a - b| / max(|a|, |b|, floor)`: relative error that falls back to an
/// absolute one for entries near zero.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
