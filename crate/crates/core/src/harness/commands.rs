use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::manifest::{unix_now, Artifact, RunManifest, TrialArtifacts, MANIFEST_SCHEMA_VERSION};
use crate::er::{train_er, ErConfig};
use crate::error::{Error, Result};
use crate::learner::tiny::{brute_force_gradient, finite_difference_gradient, relative_error, TinyMdpFixture};
use crate::learner::{train, write_curve, TrainOutcome};
use crate::matrix::Matrix;
use crate::offense::{metrics_collect, write_metrics, MetricsRecord, MetricsSummary, MiniOffense, Scenario, SkillId, GOAL};
use crate::policy::{
    gaussian_log_density, inter_skill_probs, log_grad_inter, log_grad_rad, two_tiered_log_prob, ActionMode, Checkpoint,
    SeedLineage, TwoTieredPolicy,
};
use crate::rng;
use crate::smdp::{run_episode_with, AugmentedState, EnvState, EpisodeConfig, RewardMode, Trajectory};

pub const HEATMAP_SCHEMA_VERSION: u32 = 1;

/// Stream index reserved for the post-training evaluation of a trial.
const EVAL_STREAM: u64 = u64::MAX;

/// Everything a finished `train` or `er-train` run produced.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub manifest: RunManifest,
    pub metrics: Vec<MetricsRecord>,
    pub summary: MetricsSummary,
    pub table: String,
}

pub fn checkpoint_name(trial: u32) -> String {
    format!("checkpoint_trial{trial}.json")
}

pub fn curve_name(trial: u32) -> String {
    format!("curve_trial{trial}.tsv")
}

pub const METRICS_FILE: &str = "metrics.tsv";
pub const TABLE_FILE: &str = "table.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Train `learner.trials` independent trials, evaluate each checkpoint and
/// write checkpoints, curves, metrics and the manifest into `out`.
pub fn cmd_train(cfg: &RunConfig, mode: RewardMode, scenario: Scenario, out: &Path) -> Result<TrainRun> {
    cfg.validate()?;
    let started = unix_now();
    fs::create_dir_all(out)?;
    let offense = cfg.offense(scenario);
    let horizon = cfg.episode.horizon;
    let root = cfg.learner.seed;
    let proto = MiniOffense::new(offense)?;

    let outcomes: Vec<(u64, TrainOutcome)> = (0..cfg.learner.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = rng::derive_seed(root, trial as u64);
            let init = cfg.policy.build(&proto, horizon)?;
            let tc = cfg.train_config(mode, seed)?;
            let outcome = match mode {
                RewardMode::ProbabilisticGoal => train(|| proto.clone(), init, &tc)?,
                RewardMode::ExpectedReturn => train_er(|| proto.clone(), init, &ErConfig::with_gamma(tc, cfg.episode.er_gamma)?)?,
            };
            Ok((seed, outcome))
        })
        .collect::<Result<_>>()?;

    let eval_cfg = EpisodeConfig::new(horizon, cfg.episode.beta, 1.0, RewardMode::ProbabilisticGoal)?;
    let mut trials = Vec::new();
    let mut metrics = Vec::new();
    for (trial, (seed, outcome)) in outcomes.into_iter().enumerate() {
        let trial = trial as u32;
        let lineage = SeedLineage {
            root_seed: root,
            trial,
            trial_seed: seed,
        };
        Checkpoint::from_policy(&outcome.policy, mode.tag(), lineage).save(&out.join(checkpoint_name(trial)))?;
        let mut curve = Vec::new();
        write_curve(&outcome.curve, mode.tag(), &mut curve)?;
        fs::write(out.join(curve_name(trial)), curve)?;
        let (record, _) = evaluate(&proto, &outcome.policy, &eval_cfg, cfg.learner.eval_episodes, ActionMode::Sample, rng::derive_seed(seed, EVAL_STREAM))?;
        metrics.push(record);
        trials.push(TrialArtifacts {
            trial,
            seed,
            episodes_run: outcome.episodes_run,
            stopped_early: outcome.stopped_early,
            checkpoint: Artifact::record(out, &checkpoint_name(trial))?,
            curve: Artifact::record(out, &curve_name(trial))?,
            warnings: outcome.warnings,
        });
    }

    let mut buf = Vec::new();
    write_metrics(&metrics, mode.tag(), scenario.name(), &mut buf)?;
    fs::write(out.join(METRICS_FILE), buf)?;
    let summary = MetricsSummary::from_trials(&metrics)?;
    let table = summary.to_table(&format!("{}-{}", mode.tag(), scenario.name()));
    fs::write(out.join(TABLE_FILE), &table)?;

    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        mode: mode.tag().to_owned(),
        scenario: scenario.name().to_owned(),
        config_hash: cfg.hash()?,
        config: cfg.clone(),
        root_seed: root,
        trials,
        metrics: Artifact::record(out, METRICS_FILE)?,
        started_unix: started,
        finished_unix: unix_now(),
    };
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(TrainRun {
        manifest,
        metrics,
        summary,
        table,
    })
}

/// Roll out `n` frozen-policy episodes; episode `i` uses stream `i` of `seed`.
pub fn evaluate(
    env: &MiniOffense,
    policy: &TwoTieredPolicy,
    episode: &EpisodeConfig,
    n: usize,
    mode: ActionMode,
    seed: u64,
) -> Result<(MetricsRecord, Vec<Trajectory>)> {
    let trajectories: Vec<Trajectory> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut e = env.clone();
            run_episode_with(&mut e, policy, episode, mode, &mut rng::stream(seed, i))
        })
        .collect::<Result<_>>()?;
    Ok((metrics_collect(&trajectories)?, trajectories))
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub records: Vec<MetricsRecord>,
    pub summary: MetricsSummary,
    pub table: String,
}

pub const EVAL_FILE: &str = "eval.tsv";
pub const EVAL_TABLE_FILE: &str = "eval_table.txt";

/// Evaluate one or more checkpoints (e.g. the trials of one run) and
/// aggregate them into a mean and standard deviation table.
pub fn cmd_eval(
    checkpoints: &[PathBuf],
    cfg: &RunConfig,
    scenario: Scenario,
    n_episodes: usize,
    mode: ActionMode,
    seed: u64,
    out: Option<&Path>,
) -> Result<EvalReport> {
    if checkpoints.is_empty() {
        return Err(Error::Validation("no checkpoint given".into()));
    }
    if n_episodes == 0 {
        return Err(Error::Validation("evaluation needs at least one episode".into()));
    }
    let env = MiniOffense::new(cfg.offense(scenario))?;
    let episode = EpisodeConfig::new(cfg.episode.horizon, cfg.episode.beta, 1.0, RewardMode::ProbabilisticGoal)?;
    let mut records = Vec::new();
    let mut tag = None;
    for (j, path) in checkpoints.iter().enumerate() {
        let ck = Checkpoint::load(path)?;
        let policy = ck.to_policy()?;
        use crate::smdp::Environment;
        policy.check_environment(env.state_dim(), env.num_skills())?;
        tag.get_or_insert(ck.mode.clone());
        let (record, _) = evaluate(&env, &policy, &episode, n_episodes, mode, rng::derive_seed(seed, j as u64))?;
        records.push(record);
    }
    let mode_tag = tag.unwrap_or_default();
    let summary = MetricsSummary::from_trials(&records)?;
    let greedy = if mode == ActionMode::Greedy { "-greedy" } else { "" };
    let table = summary.to_table(&format!("{mode_tag}-{}{greedy}", scenario.name()));
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        write_metrics(&records, &mode_tag, scenario.name(), &mut buf)?;
        fs::write(dir.join(EVAL_FILE), buf)?;
        fs::write(dir.join(EVAL_TABLE_FILE), &table)?;
    }
    Ok(EvalReport { records, summary, table })
}

/// One cell of the dribble-power field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub x: f64,
    pub y: f64,
    /// `phi(s)^T omega_Dribble` before clamping.
    pub rap_mean: f64,
    pub rap_clamped: f64,
}

/// Region near the halfway line: `x <= HALFWAY_MAX_X`.
pub const HALFWAY_MAX_X: f64 = 0.25;
/// Region near the goal: within this distance of the goal centre.
pub const GOAL_REGION_RADIUS: f64 = 0.3;

/// Mean dribble power over striker positions on a `resolution x resolution`
/// grid of cell centres, with the ball at the striker's feet and the keeper
/// centred on its line.
pub fn cmd_heatmap(checkpoint: &Path, cfg: &RunConfig, scenario: Scenario, resolution: usize, w: f64, t: u32) -> Result<Vec<HeatCell>> {
    if resolution == 0 {
        return Err(Error::Validation("heatmap resolution must be at least 1".into()));
    }
    let policy = Checkpoint::load(checkpoint)?.to_policy()?;
    let env = MiniOffense::new(cfg.offense(scenario))?;
    {
        use crate::smdp::Environment;
        policy.check_environment(env.state_dim(), env.num_skills())?;
    }
    heatmap(&policy, &env, resolution, w, t)
}

pub fn heatmap(policy: &TwoTieredPolicy, env: &MiniOffense, resolution: usize, w: f64, t: u32) -> Result<Vec<HeatCell>> {
    let cfg = env.config();
    let score = cfg.scenario.score();
    let mut cells = Vec::with_capacity(resolution * resolution);
    for iy in 0..resolution {
        for ix in 0..resolution {
            let x = (ix as f64 + 0.5) / resolution as f64;
            let y = (iy as f64 + 0.5) / resolution as f64;
            let z = AugmentedState {
                env: EnvState {
                    features: vec![x, y, x, y, cfg.keeper.line_x, 0.5, score.0 as f64, score.1 as f64],
                },
                w,
                t,
            };
            let rap_mean = policy.rap_mean(&z, SkillId::Dribble as usize)?;
            cells.push(HeatCell {
                x,
                y,
                rap_mean,
                rap_clamped: rap_mean.clamp(policy.rap_clamp.0, policy.rap_clamp.1),
            });
        }
    }
    Ok(cells)
}

/// Mean clamped dribble power near the halfway line and near the goal.
/// `None` for a region without grid cells.
pub fn region_means(cells: &[HeatCell]) -> (Option<f64>, Option<f64>) {
    let mean = |pred: &dyn Fn(&HeatCell) -> bool| {
        let v: Vec<f64> = cells.iter().filter(|c| pred(c)).map(|c| c.rap_clamped).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let halfway = mean(&|c| c.x <= HALFWAY_MAX_X);
    let goal = mean(&|c| (c.x - GOAL.0).hypot(c.y - GOAL.1) <= GOAL_REGION_RADIUS);
    (halfway, goal)
}

pub fn write_heatmap<W: Write>(cells: &[HeatCell], mut out: W) -> Result<()> {
    writeln!(out, "# schema_version={HEATMAP_SCHEMA_VERSION} skill=dribble")?;
    writeln!(out, "x y rap_mean rap_clamped")?;
    for c in cells {
        writeln!(out, "{:.6} {:.6} {:.6} {:.6}", c.x, c.y, c.rap_mean, c.rap_clamped)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub checks: Vec<CheckResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<54} {:>7} {:>12} {:>10}  result\n", "check", "cases", "max_error", "tolerance");
        for c in &self.checks {
            s.push_str(&format!(
                "{:<54} {:>7} {:>12.3e} {:>10.0e}  {}\n",
                c.name,
                c.cases,
                c.max_error,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" }
            ));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradcheckOptions {
    pub instances: usize,
    pub seed: u64,
    /// Negate the analytic Gaussian log-gradient before comparing, to show
    /// the suite notices a wrong sign.
    pub inject_rad_sign_flip: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            instances: 1000,
            seed: 1,
            inject_rad_sign_flip: false,
        }
    }
}

const LOG_GRAD_TOLERANCE: f64 = 1e-5;
const ORACLE_TOLERANCE: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;
const ORACLE_FD_STEP: f64 = 1e-6;
const ERROR_FLOOR: f64 = 1e-3;

fn result(name: &str, cases: usize, max_error: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.to_owned(),
        cases,
        max_error,
        tolerance,
        passed: max_error < tolerance,
    }
}

fn random_matrix(r: &mut rng::RandomSource, rows: usize, cols: usize, scale: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = r.random_range(-scale..scale);
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Analytic log-gradients against central differences, and the enumeration
/// oracle against central differences of the exact objective.
pub fn cmd_gradcheck(opts: GradcheckOptions) -> Result<GradcheckReport> {
    let mut r = rng::from_seed(opts.seed);
    let sign = if opts.inject_rad_sign_flip { -1.0 } else { 1.0 };
    let h = FD_STEP;
    let mut checks = Vec::new();

    let mut worst = 0.0_f64;
    for _ in 0..opts.instances {
        let n = r.random_range(2..5);
        let f = r.random_range(1..8);
        let alpha = random_matrix(&mut r, n, f, 3.0);
        let phi: Vec<f64> = (0..f).map(|_| r.random_range(-1.0..1.0)).collect();
        let chosen = r.random_range(0..n);
        let g = log_grad_inter(&alpha, &phi, chosen)?;
        let lp = |a: &Matrix| -> Result<f64> { Ok(inter_skill_probs(a, &phi)?[chosen].ln()) };
        for k in 0..alpha.len() {
            let mut plus = alpha.clone();
            plus.as_mut_slice()[k] += h;
            let mut minus = alpha.clone();
            minus.as_mut_slice()[k] -= h;
            let fd = (lp(&plus)? - lp(&minus)?) / (2.0 * h);
            worst = worst.max(relative_error(g.as_slice()[k], fd, ERROR_FLOOR));
        }
    }
    checks.push(result("gibbs log-gradient vs central differences", opts.instances, worst, LOG_GRAD_TOLERANCE));

    let mut worst = 0.0_f64;
    for _ in 0..opts.instances {
        let m = r.random_range(1..6);
        let omega: Vec<f64> = (0..m).map(|_| r.random_range(-50.0..50.0)).collect();
        let phi: Vec<f64> = (0..m).map(|_| r.random_range(0.0..1.0)).collect();
        let v = r.random_range(1.0..50.0);
        let y = dot(&omega, &phi) + r.random_range(-15.0..15.0);
        let g = log_grad_rad(&omega, &phi, y, v)?;
        for k in 0..m {
            let mut plus = omega.clone();
            plus[k] += h;
            let mut minus = omega.clone();
            minus[k] -= h;
            let fd = (gaussian_log_density(y, dot(&plus, &phi), v) - gaussian_log_density(y, dot(&minus, &phi), v)) / (2.0 * h);
            worst = worst.max(relative_error(sign * g[k], fd, ERROR_FLOOR));
        }
    }
    checks.push(result("gaussian log-gradient vs central differences", opts.instances, worst, LOG_GRAD_TOLERANCE));

    let fixture = TinyMdpFixture::two_state(RewardMode::ProbabilisticGoal);
    let mut worst = 0.0_f64;
    let joint_cases = opts.instances.min(200);
    for _ in 0..joint_cases {
        let policy = fixture.random_policy(&mut r)?;
        let s = r.random_range(0..fixture.num_states);
        let z = AugmentedState {
            env: EnvState {
                features: vec![s as f64],
            },
            w: r.random_range(-1.0..1.0),
            t: 0,
        };
        let sigma = r.random_range(0..fixture.num_skills);
        let y = r.random_range(-2.0..2.0);
        let (ga, mut go) = policy.log_grad(&z, sigma, y)?;
        go.scale(sign);
        for k in 0..ga.len() {
            let mut plus = policy.clone();
            plus.inter.alpha.as_mut_slice()[k] += h;
            let mut minus = policy.clone();
            minus.inter.alpha.as_mut_slice()[k] -= h;
            let fd = (two_tiered_log_prob(&plus, &z, sigma, y)? - two_tiered_log_prob(&minus, &z, sigma, y)?) / (2.0 * h);
            worst = worst.max(relative_error(ga.as_slice()[k], fd, ERROR_FLOOR));
        }
        for k in 0..go.len() {
            let mut plus = policy.clone();
            plus.rad.omega.as_mut_slice()[k] += h;
            let mut minus = policy.clone();
            minus.rad.omega.as_mut_slice()[k] -= h;
            let fd = (two_tiered_log_prob(&plus, &z, sigma, y)? - two_tiered_log_prob(&minus, &z, sigma, y)?) / (2.0 * h);
            worst = worst.max(relative_error(go.as_slice()[k], fd, ERROR_FLOOR));
        }
    }
    checks.push(result("two-tiered log-gradient vs central differences", joint_cases, worst, LOG_GRAD_TOLERANCE));

    let fixtures = [
        ("enumeration oracle vs differences, two-state goal", TinyMdpFixture::two_state(RewardMode::ProbabilisticGoal)),
        ("enumeration oracle vs differences, two-state return", TinyMdpFixture::two_state(RewardMode::ExpectedReturn)),
        ("enumeration oracle vs differences, random return", TinyMdpFixture::random(&mut r, RewardMode::ExpectedReturn)),
    ];
    for (name, fixture) in fixtures {
        let policy = fixture.random_policy(&mut r)?;
        let exact = brute_force_gradient(&fixture, &policy)?;
        let (fa, fo) = finite_difference_gradient(&fixture, &policy, ORACLE_FD_STEP)?;
        let mut omega = exact.grad_omega.clone();
        omega.scale(sign);
        let worst = exact
            .grad_alpha
            .as_slice()
            .iter()
            .zip(fa.as_slice())
            .chain(omega.as_slice().iter().zip(fo.as_slice()))
            .map(|(a, b)| relative_error(*a, *b, ERROR_FLOOR))
            .fold(0.0, f64::max);
        checks.push(result(name, exact.grad_alpha.len() + omega.len(), worst, ORACLE_TOLERANCE));
    }
    Ok(GradcheckReport { checks })
}
