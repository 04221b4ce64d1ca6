use super::*;
use crate::rng;
use crate::smdp::{run_episode, EpisodeConfig, RewardMode};
use proptest::prelude::*;

fn env(scenario: Scenario) -> MiniOffense {
    MiniOffense::new(OffenseConfig::with_scenario(scenario)).unwrap()
}

fn midfield(cfg: &OffenseConfig) -> FieldState {
    FieldState {
        striker: (0.4, 0.5),
        ball: (0.4, 0.5),
        keeper: (cfg.keeper.line_x, 0.5),
        score: cfg.scenario.score(),
        possession: Possession::Striker,
    }
}

fn effect(skill: SkillId, start_distance: f64, rap: f64, steps: u32, goal: bool) -> SkillEffect {
    SkillEffect {
        skill,
        steps,
        start_distance,
        rap,
        goal,
        capture: false,
        ball_displacement: 0.0,
    }
}

#[test]
fn scenario_scores() {
    let cfg = OffenseConfig::default();
    let mut r = rng::from_seed(1);
    assert_eq!(scenario_init(&cfg, Scenario::Winning, &mut r).score, (1, 0));
    assert_eq!(scenario_init(&cfg, Scenario::Losing, &mut r).score, (0, 1));
}

#[test]
fn scenario_init_is_deterministic() {
    let cfg = OffenseConfig::default();
    let a = scenario_init(&cfg, Scenario::Losing, &mut rng::from_seed(9));
    let b = scenario_init(&cfg, Scenario::Losing, &mut rng::from_seed(9));
    assert_eq!(a, b);
    assert_eq!(a.ball, a.striker);
    assert_eq!(a.possession, Possession::Striker);
    assert!((a.striker.0 - cfg.start_x).abs() <= cfg.start_jitter);
    assert_eq!(a.keeper.0, cfg.keeper.line_x);
}

#[test]
fn scenario_parsing() {
    assert_eq!("winning".parse::<Scenario>().unwrap(), Scenario::Winning);
    assert_eq!("losing".parse::<Scenario>().unwrap(), Scenario::Losing);
    assert!(matches!("draw".parse::<Scenario>(), Err(Error::Config(_))));
}

#[test]
fn zero_power_dribble_only_consumes_time() {
    let mut e = env(Scenario::Losing);
    let s = midfield(e.config());
    e.set_state(s.clone());
    let fx = e.skill_execute(SkillId::Dribble, 0.0, 150, &mut rng::from_seed(2)).unwrap();
    assert_eq!(fx.steps, 1);
    assert_eq!(fx.ball_displacement, 0.0);
    assert_eq!(e.state().ball, s.ball);
    assert_eq!(e.state().possession, Possession::Striker);
}

#[test]
fn dribble_duration_follows_power() {
    let cfg = OffenseConfig::default();
    for (rap, steps) in [(0.0, 1), (1.0, 2), (30.0, 2), (31.0, 3), (90.0, 4), (150.0, 6)] {
        assert_eq!(cfg.dribble_steps(rap), steps, "rap {rap}");
    }
}

#[test]
fn long_shots_rarely_score() {
    let cfg = OffenseConfig::default();
    let keeper = (cfg.keeper.line_x, 0.5);
    for x in [0.0, 0.2, 0.4, 0.49] {
        let p = cfg.goal_probability((x, 0.5), keeper);
        assert!(p < 0.1, "x {x}: p {p}");
    }
    // Oracle: the logistic formula evaluated by hand at distance 0.6, keeper
    // centred on the shot line at 0.05 from the goal (full block).
    let expect = 1.0 / (1.0 + (-(cfg.shot.bias - cfg.shot.distance_coef * 0.6 - cfg.shot.block_coef)).exp());
    assert!((cfg.goal_probability((0.4, 0.5), keeper) - expect).abs() < 1e-15);
}

#[test]
fn goal_probability_decreases_with_distance() {
    let cfg = OffenseConfig::default();
    let keeper = (cfg.keeper.line_x, 0.2);
    let ps: Vec<f64> = (0..10).map(|i| cfg.goal_probability((0.9 - 0.08 * i as f64, 0.5), keeper)).collect();
    assert!(ps.windows(2).all(|w| w[0] > w[1]), "{ps:?}");
}

#[test]
fn idle_on_ball() {
    for scenario in [Scenario::Winning, Scenario::Losing] {
        let mut e = env(scenario);
        let s = midfield(e.config());
        e.set_state(s.clone());
        let out = e.execute(SkillId::Move as usize, 0.0, 150, &mut rng::from_seed(3)).unwrap();
        let rw = &e.config().rewards;
        assert_eq!(out.steps, 1);
        assert_eq!(e.state().striker, s.striker);
        assert!((out.reward - (rw.r_move + rw.score_reward(scenario))).abs() < 1e-15);
    }
}

#[test]
fn default_reward_signs() {
    let r = RewardTable::default();
    assert!(r.sign_violations().is_empty());
    assert!(r.r_d_far > 0.0 && r.r_s_near > 0.0 && r.r_move > 0.0 && r.r_score_win > 0.0 && r.goal_reward > 0.0);
    assert!(r.r_d_near < 0.0 && r.r_s_far < 0.0 && r.r_score_lose < 0.0);
    let bad = RewardTable { r_d_near: 0.01, r_score_lose: 0.004, ..r };
    assert_eq!(bad.sign_violations().len(), 2);
    assert!(bad.validate().is_err());
}

#[test]
fn shaped_reward_examples() {
    let r = RewardTable::default();
    let far = r.near_box_threshold + 0.3;
    let near = r.near_box_threshold / 2.0;
    let win = r.r_score_win;
    let lose = r.r_score_lose;
    let cases = [
        (Scenario::Winning, effect(SkillId::Dribble, far, 30.0, 2, false), r.r_d_far + 2.0 * win),
        (Scenario::Losing, effect(SkillId::Dribble, near, 90.0, 4, false), r.r_d_near + 4.0 * lose),
        (Scenario::Losing, effect(SkillId::Shoot, far, 0.0, 7, false), r.r_s_far + 7.0 * lose),
        (Scenario::Losing, effect(SkillId::Shoot, near, 0.0, 2, true), r.r_s_near + r.goal_reward + 2.0 * lose),
        (Scenario::Losing, effect(SkillId::Move, far, 0.0, 1, false), r.r_move + lose),
        (Scenario::Losing, effect(SkillId::Dribble, far, 0.0, 1, false), lose),
    ];
    for (scenario, fx, expect) in cases {
        let got = shaped_reward(&r, scenario, &fx);
        assert!((got - expect).abs() < 1e-15, "{fx:?}: {got} vs {expect}");
    }
}

#[test]
fn losing_steps_carry_the_score_penalty() {
    let r = RewardTable::default();
    for skill in SkillId::ALL {
        let a = shaped_reward(&r, Scenario::Losing, &effect(skill, 0.5, 30.0, 3, false));
        let b = shaped_reward(&r, Scenario::Losing, &effect(skill, 0.5, 30.0, 4, false));
        assert!((b - a - r.r_score_lose).abs() < 1e-15);
    }
}

#[test]
fn keeper_stays_on_patrol_for_distant_ball() {
    let cfg = KeeperConfig::default();
    let mut state = midfield(&OffenseConfig::default());
    state.ball = (0.5, 0.5);
    state.possession = Possession::Loose;
    let mut r = rng::from_seed(4);
    for _ in 0..500 {
        state.keeper = keeper_policy(&cfg, &state, &mut r);
        assert!(state.keeper.1 >= cfg.patrol.0 - 1e-12 && state.keeper.1 <= cfg.patrol.1 + 1e-12);
        assert!((state.keeper.0 - cfg.line_x).abs() < 1e-12);
    }
}

#[test]
fn keeper_captures_ball_within_reach() {
    let mut e = env(Scenario::Losing);
    let cfg = e.config().clone();
    let mut s = midfield(&cfg);
    s.striker = (0.5, 0.5);
    s.ball = (cfg.keeper.line_x - cfg.keeper.reach / 2.0, 0.5);
    s.possession = Possession::Loose;
    e.set_state(s);
    let out = e.execute(SkillId::Move as usize, 0.0, 150, &mut rng::from_seed(5)).unwrap();
    assert_eq!(out.terminal.as_deref(), Some(EVENT_CAPTURE));
    assert_eq!(e.state().possession, Possession::Keeper);
}

#[test]
fn keeper_with_zero_speed_is_static() {
    let cfg = KeeperConfig { speed: 0.0, ..KeeperConfig::default() };
    let mut state = midfield(&OffenseConfig::default());
    state.ball = (0.9, 0.9);
    let start = state.keeper;
    let mut r = rng::from_seed(6);
    for _ in 0..50 {
        state.keeper = keeper_policy(&cfg, &state, &mut r);
        assert_eq!(state.keeper, start);
    }
}

#[test]
fn unavailable_skill_falls_back_to_move() {
    let mut e = env(Scenario::Losing);
    let mut s = midfield(e.config());
    s.ball = (0.6, 0.5);
    s.possession = Possession::Loose;
    e.set_state(s);
    let fx = e.skill_execute(SkillId::Shoot, 0.0, 150, &mut rng::from_seed(7)).unwrap();
    assert_eq!(fx.skill, SkillId::Move);
    assert_eq!(e.fallbacks(), 1);
}

#[test]
fn dribble_displacement_is_monotone_in_power() {
    let levels = [0.0, 30.0, 60.0, 90.0, 120.0, 150.0];
    let per_level = 10_000 / levels.len();
    let mut e = env(Scenario::Losing);
    let start = midfield(e.config());
    let mut stats = Vec::new();
    for (li, &rap) in levels.iter().enumerate() {
        let xs: Vec<f64> = (0..per_level)
            .map(|i| {
                e.set_state(start.clone());
                let mut r = rng::stream(11, (li * per_level + i) as u64);
                e.skill_execute(SkillId::Dribble, rap, 150, &mut r).unwrap().ball_displacement
            })
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        stats.push((mean, (var / n).sqrt()));
    }
    for w in stats.windows(2) {
        let ((m0, s0), (m1, s1)) = (w[0], w[1]);
        assert!(m1 + 2.0 * (s0 + s1) >= m0, "{stats:?}");
    }
}

fn move_only_policy(e: &MiniOffense) -> crate::policy::TwoTieredPolicy {
    let setup = PolicySetup {
        initial_logits: [60.0, -60.0, -60.0],
        ..PolicySetup::default()
    };
    setup.build(e, 150).unwrap()
}

#[test]
fn timeouts_consume_the_whole_horizon() {
    let mut e = env(Scenario::Winning);
    let policy = move_only_policy(&e);
    let cfg = EpisodeConfig::new(150, 1.0, 1.0, RewardMode::ProbabilisticGoal).unwrap();
    let trs: Vec<_> = (0..20).map(|i| run_episode(&mut e, &policy, &cfg, &mut rng::stream(12, i)).unwrap()).collect();
    for tr in &trs {
        assert_eq!(tr.end, crate::smdp::EpisodeEnd::Timeout);
        let consumed: u32 = tr.steps.iter().map(|s| s.z_next.t - s.z.t).sum();
        assert_eq!(consumed, 150);
    }
    let m = metrics_collect(&trs).unwrap();
    assert_eq!(m.out_of_time, 100.0);
    assert_eq!(m.goals, 0.0);
    assert_eq!(m.captures, 0.0);
    // Pure idling in the winning scenario: (r_move + r_score_win) per step.
    let rw = &e.config().rewards;
    assert!((m.avg_reward - 150.0 * (rw.r_move + rw.r_score_win)).abs() < 1e-9);
}

#[test]
fn outcomes_partition_the_batch() {
    let mut e = env(Scenario::Losing);
    let policy = PolicySetup::default().build(&e, 150).unwrap();
    let cfg = EpisodeConfig::new(150, 1.0, 1.0, RewardMode::ProbabilisticGoal).unwrap();
    let trs: Vec<_> = (0..100).map(|i| run_episode(&mut e, &policy, &cfg, &mut rng::stream(13, i)).unwrap()).collect();
    let m = metrics_collect(&trs).unwrap();
    assert!((m.goals + m.captures + m.out_of_time - 100.0).abs() < 1e-9);
    let w: f64 = trs.iter().map(|t| t.final_w()).sum::<f64>() / 100.0;
    assert!((m.avg_reward - w).abs() < 1e-12);
    assert!(metrics_collect(&[]).is_err());
}

#[test]
fn episodes_are_deterministic_per_seed() {
    let cfg = EpisodeConfig::new(150, 1.0, 1.0, RewardMode::ProbabilisticGoal).unwrap();
    let run = || {
        let mut e = env(Scenario::Losing);
        e.record_frames(true);
        let policy = PolicySetup::default().build(&e, 150).unwrap();
        let tr = run_episode(&mut e, &policy, &cfg, &mut rng::stream(14, 3)).unwrap();
        let mut out = Vec::new();
        write_trace(&tr, e.frames(), &mut out).unwrap();
        out
    };
    let a = run();
    assert_eq!(a, run());
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().any(|l| l.starts_with("decision {")));
    assert!(text.lines().any(|l| l.starts_with("frame {")));
}

#[test]
fn metrics_summary_and_table() {
    let rec = |g: f64| MetricsRecord {
        episodes: 100,
        goals: g,
        captures: 100.0 - g,
        out_of_time: 0.0,
        avg_reward: g / 100.0,
        avg_episode_length: 70.0,
    };
    let s = MetricsSummary::from_trials(&[rec(70.0), rec(80.0)]).unwrap();
    assert_eq!(s.mean.goals, 75.0);
    assert_eq!(s.std.goals, 5.0);
    assert_eq!(s.std.avg_episode_length, 0.0);
    let table = s.to_table("losing");
    assert!(table.contains("75.0"), "{table}");
    let mut out = Vec::new();
    write_metrics(&[rec(70.0)], "saricos", "losing", &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with(&format!("# schema_version={METRICS_SCHEMA_VERSION} mode=saricos scenario=losing")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positions_stay_in_bounds(seed in any::<u64>(), skills in proptest::collection::vec((0usize..3, 0.0f64..200.0), 1..60)) {
        let mut e = env(Scenario::Losing);
        let mut r = rng::from_seed(seed);
        e.reset(&mut r);
        let mut left = 150u32;
        for (skill, rap) in skills {
            if left == 0 {
                break;
            }
            let out = e.execute(skill, rap, left, &mut r).unwrap();
            prop_assert!(e.state().in_bounds());
            prop_assert!(out.steps >= 1 && out.steps <= left);
            left -= out.steps;
            if out.terminal.is_some() {
                break;
            }
        }
    }
}
