use proptest::prelude::*;

use super::*;
use crate::learner::tiny::TinyMdpFixture;
use crate::matrix::Matrix;
use crate::policy::{FeatureSpec, Input, InterSkillParams, RadFeatureSpec, RadParams};
use crate::rng;

/// One skill that always pays `reward` and lasts `duration` steps.
struct Constant {
    reward: f64,
    duration: u32,
    stop_after: Option<u32>,
    elapsed: u32,
}

impl Constant {
    fn new(reward: f64, duration: u32) -> Self {
        Constant {
            reward,
            duration,
            stop_after: None,
            elapsed: 0,
        }
    }
}

impl Environment for Constant {
    fn state_dim(&self) -> usize {
        1
    }

    fn num_skills(&self) -> usize {
        2
    }

    fn reset(&mut self, _rng: &mut RandomSource) -> EnvState {
        self.elapsed = 0;
        EnvState { features: vec![0.0] }
    }

    fn execute(&mut self, _skill: usize, _rap: f64, max_steps: u32, _rng: &mut RandomSource) -> Result<SkillOutcome> {
        let steps = self.duration.min(max_steps);
        self.elapsed += steps;
        Ok(SkillOutcome {
            steps,
            reward: self.reward * steps as f64,
            next: EnvState {
                features: vec![self.elapsed as f64],
            },
            terminal: match self.stop_after {
                Some(s) if self.elapsed >= s => Some("capture".into()),
                _ => None,
            },
        })
    }
}

fn policy() -> TwoTieredPolicy {
    let inputs = vec![Input::Env(0)];
    let bounds = vec![(0.0, 150.0)];
    TwoTieredPolicy::new(
        InterSkillParams {
            alpha: Matrix::zeros(2, 2),
        },
        RadParams {
            omega: Matrix::zeros(2, 2),
            variance: 1.0,
        },
        FeatureSpec::raw(inputs.clone(), bounds.clone()).unwrap(),
        RadFeatureSpec::Raw { inputs, bounds },
        (0.0, 150.0),
        vec!["a".into(), "b".into()],
        1,
    )
    .unwrap()
}

fn cfg(beta: f64, mode: RewardMode) -> EpisodeConfig {
    EpisodeConfig::new(150, beta, 1.0, mode).unwrap()
}

fn state(w: f64, t: u32) -> AugmentedState {
    AugmentedState {
        env: EnvState { features: vec![0.0] },
        w,
        t,
    }
}

#[test]
fn augment_accumulates_reward() {
    let env = EnvState { features: vec![1.0] };
    assert_eq!(augment_transition(&state(0.0, 0), 0.5, env.clone(), 1).unwrap().w, 0.5);
    let z = augment_transition(&state(0.5, 10), 0.0, env.clone(), 3).unwrap();
    assert_eq!((z.w, z.t), (0.5, 13));
    assert_eq!(z.env, env);
    let z = augment_transition(&state(0.9, 149), 0.2, env.clone(), 1).unwrap();
    assert!((z.w - 1.1).abs() < 1e-15);
    assert!(augment_transition(&state(0.0, 0), f64::NAN, env, 1).is_err());
}

#[test]
fn indicator_reward_cases() {
    assert_eq!(augmented_reward(5, 150, 0.4, 1.0).unwrap(), 0.0);
    assert_eq!(augmented_reward(150, 150, 1.2, 1.0).unwrap(), 1.0);
    assert_eq!(augmented_reward(150, 150, 1.0, 1.0).unwrap(), 1.0);
    assert_eq!(augmented_reward(150, 150, 0.99, 1.0).unwrap(), 0.0);
    assert_eq!(augmented_reward(149, 150, 5.0, 1.0).unwrap(), 0.0);
    assert!(matches!(augmented_reward(151, 150, 1.0, 1.0), Err(Error::Contract(_))));
}

#[test]
fn episode_config_validation() {
    assert!(EpisodeConfig::new(0, 1.0, 1.0, RewardMode::ProbabilisticGoal).is_err());
    assert!(EpisodeConfig::new(10, 1.0, 1.5, RewardMode::ProbabilisticGoal).is_err());
    assert!(EpisodeConfig::new(10, 1.0, -0.1, RewardMode::ExpectedReturn).is_err());
    assert!(EpisodeConfig::new(1, 1.0, 0.0, RewardMode::ExpectedReturn).is_ok());
}

#[test]
fn constant_reward_episode_crosses_threshold() {
    let mut r = rng::from_seed(0);
    let tr = run_episode(&mut Constant::new(0.01, 1), &policy(), &cfg(1.0, RewardMode::ProbabilisticGoal), &mut r).unwrap();
    assert_eq!(tr.steps.len(), 150);
    assert!((tr.final_w() - 1.5).abs() < 1e-12);
    assert_eq!(tr.steps.last().unwrap().reward, 1.0);
    assert!(tr.steps[..149].iter().all(|s| s.reward == 0.0));
    tr.validate().unwrap();

    let tr = run_episode(&mut Constant::new(0.01, 1), &policy(), &cfg(2.0, RewardMode::ProbabilisticGoal), &mut r).unwrap();
    assert_eq!(tr.steps.last().unwrap().reward, 0.0);
}

#[test]
fn expected_return_mode_records_base_rewards() {
    let mut r = rng::from_seed(0);
    let tr = run_episode(&mut Constant::new(0.01, 1), &policy(), &cfg(1.0, RewardMode::ExpectedReturn), &mut r).unwrap();
    assert!(tr.steps.iter().all(|s| s.reward == s.base_reward && s.reward == 0.01));
}

#[test]
fn multi_step_skills_respect_the_budget() {
    let mut r = rng::from_seed(0);
    let tr = run_episode(&mut Constant::new(0.01, 7), &policy(), &cfg(1.0, RewardMode::ProbabilisticGoal), &mut r).unwrap();
    // 21 full skills cover 147 steps; the last one is truncated to 3.
    assert_eq!(tr.steps.len(), 22);
    assert_eq!(tr.length(), 150);
    assert_eq!(tr.steps.last().unwrap().z_next.t - tr.steps.last().unwrap().z.t, 3);
    assert!(tr.steps.iter().all(|s| s.z.t % 7 == 0));
    tr.validate().unwrap();
}

#[test]
fn early_termination_is_absorbing_until_the_horizon() {
    let mut env = Constant::new(0.5, 1);
    env.stop_after = Some(3);
    let mut r = rng::from_seed(0);
    let tr = run_episode(&mut env, &policy(), &cfg(1.0, RewardMode::ProbabilisticGoal), &mut r).unwrap();
    assert_eq!(tr.steps.len(), 3);
    assert_eq!(tr.length(), 3);
    assert_eq!(tr.event(), Some("capture"));
    assert!(tr.horizon_reached());
    // w = 1.5 is judged at t = T through the absorbing state.
    assert_eq!(tr.steps.last().unwrap().reward, 1.0);
    tr.validate().unwrap();
}

#[test]
fn rollouts_are_deterministic_per_seed() {
    let f = TinyMdpFixture::two_state(RewardMode::ProbabilisticGoal);
    let mut pr = rng::from_seed(11);
    let p = f.random_policy(&mut pr).unwrap();
    let run = |seed| {
        let mut env = f.env().unwrap();
        run_episode(&mut env, &p, &f.episode_config(), &mut rng::from_seed(seed)).unwrap()
    };
    assert_eq!(run(5), run(5));
    let differs = (0..20).any(|s| run(s) != run(5));
    assert!(differs);
}

#[test]
fn success_probability_counts_threshold_hits() {
    let mut r = rng::from_seed(2);
    let mut batch = Vec::new();
    for i in 0..10 {
        let reward = if i < 7 { 0.01 } else { 0.001 };
        batch.push(run_episode(&mut Constant::new(reward, 1), &policy(), &cfg(1.0, RewardMode::ProbabilisticGoal), &mut r).unwrap());
    }
    assert_eq!(success_probability_estimate(&batch, 1.0).unwrap(), 0.7);
    assert_eq!(success_probability_estimate(&batch[..7], 1.0).unwrap(), 1.0);
    assert!(success_probability_estimate(&[], 1.0).is_err());
}

#[test]
fn success_probability_equals_mean_indicator_return_bitwise() {
    let f = TinyMdpFixture::two_state(RewardMode::ProbabilisticGoal);
    let mut r = rng::from_seed(4);
    let p = f.random_policy(&mut r).unwrap();
    let mut env = f.env().unwrap();
    let batch: Vec<_> = (0..100)
        .map(|_| run_episode(&mut env, &p, &f.episode_config(), &mut r).unwrap())
        .collect();
    let mean: f64 = batch.iter().map(|tr| tr.discounted_return(1.0)).sum::<f64>() / batch.len() as f64;
    let p_hat = success_probability_estimate(&batch, f.beta).unwrap();
    assert_eq!(mean.to_bits(), p_hat.to_bits());
    assert!(p_hat > 0.0 && p_hat < 1.0);
}

#[test]
fn dump_round_trips() {
    let f = TinyMdpFixture::two_state(RewardMode::ProbabilisticGoal);
    let mut r = rng::from_seed(9);
    let p = f.random_policy(&mut r).unwrap();
    let tr = run_episode(&mut f.env().unwrap(), &p, &f.episode_config(), &mut r).unwrap();
    let mut buf = Vec::new();
    dump_trajectory(&tr, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), tr.steps.len());
    let records = parse_trajectory_dump(&buf[..]).unwrap();
    for (rec, step) in records.iter().zip(&tr.steps) {
        assert_eq!(rec.t, step.z.t);
        assert_eq!(rec.skill, step.skill);
        assert_eq!(rec.w, step.z_next.w);
        assert_eq!(rec.augmented_reward, step.reward);
    }
}

#[test]
fn broken_chain_is_detected() {
    let f = TinyMdpFixture::two_state(RewardMode::ExpectedReturn);
    let mut r = rng::from_seed(9);
    let p = f.random_policy(&mut r).unwrap();
    let mut tr = run_episode(&mut f.env().unwrap(), &p, &f.episode_config(), &mut r).unwrap();
    tr.steps[1].z.w += 1.0;
    assert!(tr.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn indicator_rewards_are_binary_and_terminal(seed in any::<u64>()) {
        let mut r = rng::from_seed(seed);
        let f = TinyMdpFixture::random(&mut r, RewardMode::ProbabilisticGoal);
        let p = f.random_policy(&mut r).unwrap();
        let tr = run_episode(&mut f.env().unwrap(), &p, &f.episode_config(), &mut r).unwrap();
        tr.validate().unwrap();
        for s in &tr.steps {
            prop_assert!(s.reward == 0.0 || s.reward == 1.0);
            if s.z_next.t < tr.horizon {
                prop_assert_eq!(s.reward, 0.0);
            }
        }
        let total: f64 = tr.steps.iter().map(|s| s.reward).sum();
        prop_assert_eq!(total, if tr.final_w() >= f.beta { 1.0 } else { 0.0 });
    }

    #[test]
    fn accumulation_matches_base_rewards(seed in any::<u64>()) {
        let mut r = rng::from_seed(seed);
        let f = TinyMdpFixture::random(&mut r, RewardMode::ExpectedReturn);
        let p = f.random_policy(&mut r).unwrap();
        let tr = run_episode(&mut f.env().unwrap(), &p, &f.episode_config(), &mut r).unwrap();
        prop_assert!((tr.final_w() - tr.initial_w() - tr.base_reward_sum()).abs() <= 1e-12);
    }
}
