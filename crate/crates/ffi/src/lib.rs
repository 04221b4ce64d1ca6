//! C ABI over the `pgsmdp` library.
//!
//! Policies and environments are opaque handles created by `*_load` /
//! `*_new` and released with the matching `*_free`. Every fallible call
//! returns a [`PgsmdpStatus`]; on failure the message is available from
//! [`pgsmdp_last_error`] on the same thread until the next failing call.
//!
//! Handles are not thread-safe. A policy may be shared read-only between
//! threads as long as nobody frees it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use pgsmdp::harness::{self, RunConfig};
use pgsmdp::offense::{MiniOffense, Scenario};
use pgsmdp::policy::{ActionMode, Checkpoint, TwoTieredPolicy};
use pgsmdp::rng::{self, RandomSource};
use pgsmdp::smdp::{AugmentedState, EnvState, Environment, EpisodeConfig, RewardMode};
use pgsmdp::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgsmdpStatus {
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// Bad value, wrong length or out-of-range index.
    InvalidArgument = 2,
    /// Configuration file could not be parsed or failed validation.
    InvalidConfig = 3,
    Io = 4,
    /// Malformed checkpoint or unsupported schema version.
    Format = 5,
    /// The output buffer is shorter than required.
    BufferTooSmall = 6,
    /// Simulation or numerical failure.
    Runtime = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgsmdpScenario {
    Losing = 0,
    Winning = 1,
}

impl From<PgsmdpScenario> for Scenario {
    fn from(s: PgsmdpScenario) -> Self {
        match s {
            PgsmdpScenario::Losing => Scenario::Losing,
            PgsmdpScenario::Winning => Scenario::Winning,
        }
    }
}

/// Batch metrics, outcome counts per 100 episodes.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PgsmdpMetrics {
    pub episodes: u64,
    pub goals: f64,
    pub captures: f64,
    pub out_of_time: f64,
    pub avg_reward: f64,
    pub avg_episode_length: f64,
}

/// Result of one skill execution.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PgsmdpStep {
    pub steps: u32,
    pub reward: f64,
    /// Nonzero when the episode ended inside the skill.
    pub terminal: i32,
}

/// Frozen two-tiered policy loaded from a checkpoint.
pub struct PgsmdpPolicy {
    policy: TwoTieredPolicy,
}

/// Mini offense simulator with its own random stream.
pub struct PgsmdpEnv {
    env: MiniOffense,
    episode: EpisodeConfig,
    rng: RandomSource,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PgsmdpStatus {
    match err {
        Error::Config(_) | Error::Toml(_) => PgsmdpStatus::InvalidConfig,
        Error::Io(_) => PgsmdpStatus::Io,
        Error::Json(_) | Error::Schema { .. } => PgsmdpStatus::Format,
        Error::Validation(_) | Error::Dimension { .. } | Error::Contract(_) => PgsmdpStatus::InvalidArgument,
        _ => PgsmdpStatus::Runtime,
    }
}

struct Failure(PgsmdpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: PgsmdpStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Run `f`, record any failure and translate it to a status.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> PgsmdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PgsmdpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside pgsmdp".into());
            PgsmdpStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller promises a non-null `p` points to a live value.
    unsafe { p.as_ref() }.ok_or_else(|| fail(PgsmdpStatus::NullArgument, format!("{what} is null")))
}

fn non_null_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as above, with exclusive access.
    unsafe { p.as_mut() }.ok_or_else(|| fail(PgsmdpStatus::NullArgument, format!("{what} is null")))
}

fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(fail(PgsmdpStatus::NullArgument, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(PgsmdpStatus::InvalidArgument, format!("{what} is not valid UTF-8")))?;
    Ok(Path::new(s))
}

fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PgsmdpStatus::NullArgument, format!("{what} is null")));
    }
    // SAFETY: the caller provides `len` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn augmented(policy: &TwoTieredPolicy, features: *const f64, len: usize, w: f64, t: u32) -> Result<AugmentedState, Failure> {
    if len != policy.state_dim {
        return Err(fail(
            PgsmdpStatus::InvalidArgument,
            format!("expected {} features, got {len}", policy.state_dim),
        ));
    }
    let features = slice_arg(features, len, "features")?.to_vec();
    let mut z = AugmentedState::initial(EnvState { features });
    z.w = w;
    z.t = t;
    Ok(z)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pgsmdp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pgsmdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a policy checkpoint (JSON written by `pgsmdp train`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_policy_load(path: *const c_char, out: *mut *mut PgsmdpPolicy) -> PgsmdpStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = std::ptr::null_mut();
        let policy = Checkpoint::load(path_arg(path, "path")?)?.to_policy()?;
        *out = Box::into_raw(Box::new(PgsmdpPolicy { policy }));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from [`pgsmdp_policy_load`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_policy_free(policy: *mut PgsmdpPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Number of skills, or 0 for a null handle.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_policy_num_skills(policy: *const PgsmdpPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.policy.num_skills())
}

/// Length of the environment feature vector, or 0 for a null handle.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_policy_state_dim(policy: *const PgsmdpPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.policy.state_dim)
}

/// Skill probabilities at state `{features, w, t}` into `out[0..num_skills]`.
///
/// # Safety
/// `features` must hold `features_len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_policy_skill_probs(
    policy: *const PgsmdpPolicy,
    features: *const f64,
    features_len: usize,
    w: f64,
    t: u32,
    out: *mut f64,
    out_len: usize,
) -> PgsmdpStatus {
    guard(|| {
        let p = &non_null(policy, "policy")?.policy;
        let z = augmented(p, features, features_len, w, t)?;
        let probs = p.skill_probs(&z)?;
        if out.is_null() {
            return Err(fail(PgsmdpStatus::NullArgument, "out is null"));
        }
        if out_len < probs.len() {
            return Err(fail(
                PgsmdpStatus::BufferTooSmall,
                format!("need {} doubles, got {out_len}", probs.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, probs.len()).copy_from_slice(&probs);
        Ok(())
    })
}

/// Unclamped mean of skill `skill`'s risk-awareness distribution.
///
/// # Safety
/// `features` must hold `features_len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_policy_rap_mean(
    policy: *const PgsmdpPolicy,
    features: *const f64,
    features_len: usize,
    w: f64,
    t: u32,
    skill: usize,
    out: *mut f64,
) -> PgsmdpStatus {
    guard(|| {
        let p = &non_null(policy, "policy")?.policy;
        let out = non_null_mut(out, "out")?;
        if skill >= p.num_skills() {
            return Err(fail(
                PgsmdpStatus::InvalidArgument,
                format!("skill {skill} out of range (policy has {})", p.num_skills()),
            ));
        }
        let z = augmented(p, features, features_len, w, t)?;
        *out = p.rap_mean(&z, skill)?;
        Ok(())
    })
}

/// Create a mini offense environment. `config_path` may be null for the
/// built-in defaults, otherwise it names a TOML run configuration whose
/// `[env]`, `[rewards]` and `[episode]` sections are used.
///
/// # Safety
/// `config_path` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_env_new(
    scenario: PgsmdpScenario,
    config_path: *const c_char,
    seed: u64,
    out: *mut *mut PgsmdpEnv,
) -> PgsmdpStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = std::ptr::null_mut();
        let cfg = if config_path.is_null() {
            RunConfig::default()
        } else {
            RunConfig::load(path_arg(config_path, "config_path")?)?
        };
        let env = MiniOffense::new(cfg.offense(scenario.into()))?;
        let episode = EpisodeConfig::new(cfg.episode.horizon, cfg.episode.beta, cfg.episode.gamma, RewardMode::ProbabilisticGoal)?;
        *out = Box::into_raw(Box::new(PgsmdpEnv {
            env,
            episode,
            rng: rng::from_seed(seed),
        }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`pgsmdp_env_new`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_env_free(env: *mut PgsmdpEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Length of the observation vector, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_env_state_dim(env: *const PgsmdpEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.state_dim())
}

fn write_observation(state: &EnvState, out: *mut f64, out_len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(PgsmdpStatus::NullArgument, "out is null"));
    }
    if out_len < state.features.len() {
        return Err(fail(
            PgsmdpStatus::BufferTooSmall,
            format!("need {} doubles, got {out_len}", state.features.len()),
        ));
    }
    // SAFETY: checked non-null with room for the features.
    unsafe { std::slice::from_raw_parts_mut(out, state.features.len()) }.copy_from_slice(&state.features);
    Ok(())
}

/// Start a new episode and write the initial observation.
///
/// # Safety
/// `env` must be a live handle; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_env_reset(env: *mut PgsmdpEnv, out: *mut f64, out_len: usize) -> PgsmdpStatus {
    guard(|| {
        let e = non_null_mut(env, "env")?;
        let state = e.env.reset(&mut e.rng);
        write_observation(&state, out, out_len)
    })
}

/// Execute one skill (0 move, 1 shoot, 2 dribble) with risk-awareness
/// parameter `rap`, using at most `max_steps` timesteps. Writes the next
/// observation to `obs` and the outcome to `step`.
///
/// # Safety
/// `env` must be a live handle; `obs` must hold `obs_len` doubles and
/// `step` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_env_execute(
    env: *mut PgsmdpEnv,
    skill: usize,
    rap: f64,
    max_steps: u32,
    obs: *mut f64,
    obs_len: usize,
    step: *mut PgsmdpStep,
) -> PgsmdpStatus {
    guard(|| {
        let e = non_null_mut(env, "env")?;
        let step = non_null_mut(step, "step")?;
        if skill >= e.env.num_skills() || max_steps == 0 || !rap.is_finite() {
            return Err(fail(
                PgsmdpStatus::InvalidArgument,
                format!("bad skill call: skill {skill}, rap {rap}, max_steps {max_steps}"),
            ));
        }
        let outcome = e.env.execute(skill, rap, max_steps, &mut e.rng)?;
        write_observation(&outcome.next, obs, obs_len)?;
        *step = PgsmdpStep {
            steps: outcome.steps,
            reward: outcome.reward,
            terminal: outcome.terminal.is_some() as i32,
        };
        Ok(())
    })
}

/// Roll out `episodes` frozen-policy episodes and summarise them.
/// Episode `i` uses random stream `i` of `seed`, so results are
/// reproducible and independent of the environment's own stream.
///
/// # Safety
/// `policy` and `env` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pgsmdp_evaluate(
    policy: *const PgsmdpPolicy,
    env: *const PgsmdpEnv,
    episodes: u64,
    seed: u64,
    greedy: i32,
    out: *mut PgsmdpMetrics,
) -> PgsmdpStatus {
    guard(|| {
        let p = &non_null(policy, "policy")?.policy;
        let e = non_null(env, "env")?;
        let out = non_null_mut(out, "out")?;
        if episodes == 0 {
            return Err(fail(PgsmdpStatus::InvalidArgument, "episodes must be positive"));
        }
        p.check_environment(e.env.state_dim(), e.env.num_skills())?;
        let mode = if greedy != 0 { ActionMode::Greedy } else { ActionMode::Sample };
        let (m, _) = harness::evaluate(&e.env, p, &e.episode, episodes as usize, mode, seed)?;
        *out = PgsmdpMetrics {
            episodes: m.episodes as u64,
            goals: m.goals,
            captures: m.captures,
            out_of_time: m.out_of_time,
            avg_reward: m.avg_reward,
            avg_episode_length: m.avg_episode_length,
        };
        Ok(())
    })
}
