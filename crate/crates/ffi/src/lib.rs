//! C ABI over the `mvap` simulator.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns an [`MvapStatus`]; on failure the message is
//! available from [`mvap_last_error`] on the same thread. Panics never cross
//! the boundary, they are reported as `MVAP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mvap::agents::{Algorithm, EpisodeRecord};
use mvap::env::{ActionIndex, EnvConfig, EnvState, OffloadEnv, StepOutcome, FEATURES};
use mvap::harness::{run_cell, ExperimentConfig};
use mvap::rng::{self, EnvRng};
use mvap::sinr::SinrChain;
use mvap::Error;
use rand_chacha::ChaCha8Rng;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParam = 2,
    InvalidAction = 3,
    NotReset = 4,
    Config = 5,
    NonStochasticRow = 6,
    ZeroRate = 7,
    Numeric = 8,
    BufferTooSmall = 9,
    Utf8 = 10,
    Io = 11,
    Panic = 99,
}

/// Algorithm selector for [`mvap_train`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvapAlgorithm {
    Ql = 0,
    Dqn = 1,
    Ddqn = 2,
    Rm = 3,
}

/// Observable state of the environment (raw units).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MvapState {
    pub b_total_bits: f64,
    pub sinr_db: f64,
    pub t_total_prev_s: f64,
    pub f_mvap_hz: f64,
    pub f_ecs_hz: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MvapStepResult {
    pub next_state: MvapState,
    pub reward: f64,
    pub t_total_s: f64,
    pub t_sensing_comm_s: f64,
    pub t_local_s: f64,
    pub t_offloading_ecs_s: f64,
    pub b_offload_bits: f64,
    pub b_local_bits: f64,
    /// 1 when the latency requirement was missed.
    pub violated: u8,
    /// 1 on the last step of the episode.
    pub terminal: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MvapEpisodeRecord {
    pub episode: u64,
    pub reward_total: f64,
    pub reward_mean: f64,
    pub violations: u64,
    pub mean_t_total: f64,
    pub epsilon: f64,
}

/// Opaque environment plus its random streams.
pub struct MvapEnv {
    env: OffloadEnv,
    rng: EnvRng,
}

/// Opaque SINR Markov chain plus its random stream.
pub struct MvapChain {
    chain: SinrChain,
    rng: ChaCha8Rng,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> MvapStatus {
    match e {
        Error::InvalidParam { .. } | Error::EmptyMvdSet | Error::EmptyUserSet | Error::ShapeMismatch(_) => {
            MvapStatus::InvalidParam
        }
        Error::InvalidAction { .. } => MvapStatus::InvalidAction,
        Error::NotReset => MvapStatus::NotReset,
        Error::Config { .. } => MvapStatus::Config,
        Error::NonStochasticRow { .. } => MvapStatus::NonStochasticRow,
        Error::ZeroRate => MvapStatus::ZeroRate,
        Error::Io { .. } => MvapStatus::Io,
        _ => MvapStatus::Numeric,
    }
}

fn fail(status: MvapStatus, msg: impl Into<String>) -> MvapStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), MvapStatus>) -> MvapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MvapStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(MvapStatus::Panic, "internal panic"),
    }
}

fn check(e: Error) -> MvapStatus {
    fail(status_of(&e), e.to_string())
}

fn state_out(s: &EnvState) -> MvapState {
    MvapState {
        b_total_bits: s.b_total_bits,
        sinr_db: s.sinr_db,
        t_total_prev_s: s.t_total_prev_s,
        f_mvap_hz: s.f_mvap_hz,
        f_ecs_hz: s.f_ecs_hz,
    }
}

fn step_out(o: &StepOutcome) -> MvapStepResult {
    MvapStepResult {
        next_state: state_out(&o.next_state),
        reward: o.reward,
        t_total_s: o.breakdown.t_total_s,
        t_sensing_comm_s: o.breakdown.t_sensing_comm_s,
        t_local_s: o.breakdown.t_local_s,
        t_offloading_ecs_s: o.breakdown.t_offloading_ecs_s,
        b_offload_bits: o.b_offload,
        b_local_bits: o.b_local,
        violated: u8::from(o.violated),
        terminal: u8::from(o.terminal),
    }
}

unsafe fn config_text<'a>(toml: *const c_char) -> Result<Option<&'a str>, MvapStatus> {
    if toml.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(toml)
        .to_str()
        .map(Some)
        .map_err(|_| fail(MvapStatus::Utf8, "config text is not UTF-8"))
}

unsafe fn experiment(toml: *const c_char) -> Result<ExperimentConfig, MvapStatus> {
    match config_text(toml)? {
        None => Ok(ExperimentConfig::default()),
        Some(text) => ExperimentConfig::from_toml_str(text).map_err(check),
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mvap_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mvap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Number of features produced by [`mvap_env_features`].
#[no_mangle]
pub extern "C" fn mvap_feature_count() -> usize {
    FEATURES
}

/// Creates an environment. `config_toml` is an experiment config document
/// (only its `[env]` table is used) or null for the defaults.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be a
/// valid pointer. The handle must be released with [`mvap_env_free`].
#[no_mangle]
pub unsafe extern "C" fn mvap_env_new(config_toml: *const c_char, seed: u64, out: *mut *mut MvapEnv) -> MvapStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(MvapStatus::NullPointer, "out is null"));
        }
        let cfg: EnvConfig = experiment(config_toml)?.env;
        let env = OffloadEnv::new(cfg).map_err(check)?;
        *out = Box::into_raw(Box::new(MvapEnv {
            env,
            rng: EnvRng::from_seed(seed),
        }));
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle from [`mvap_env_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvap_env_free(env: *mut MvapEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mvap_env_action_count(env: *const MvapEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.action_count())
}

/// Starts a new episode and writes its first state.
///
/// # Safety
/// `env` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvap_env_reset(env: *mut MvapEnv, out: *mut MvapState) -> MvapStatus {
    guard(|| {
        let (Some(h), false) = (env.as_mut(), out.is_null()) else {
            return Err(fail(MvapStatus::NullPointer, "null argument"));
        };
        let s = h.env.reset(&mut h.rng);
        *out = state_out(&s);
        Ok(())
    })
}

/// Applies offloading action `action` (0 ..= action_count - 1).
///
/// # Safety
/// `env` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvap_env_step(env: *mut MvapEnv, action: usize, out: *mut MvapStepResult) -> MvapStatus {
    guard(|| {
        let (Some(h), false) = (env.as_mut(), out.is_null()) else {
            return Err(fail(MvapStatus::NullPointer, "null argument"));
        };
        let o = h.env.step(ActionIndex(action), &mut h.rng).map_err(check)?;
        *out = step_out(&o);
        Ok(())
    })
}

/// Writes the normalized network features of `state` into `out[0..5]`.
///
/// # Safety
/// `env` must be a live handle; `state` valid; `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mvap_env_features(
    env: *const MvapEnv,
    state: *const MvapState,
    out: *mut f64,
    len: usize,
) -> MvapStatus {
    guard(|| {
        let (Some(h), Some(s), false) = (env.as_ref(), state.as_ref(), out.is_null()) else {
            return Err(fail(MvapStatus::NullPointer, "null argument"));
        };
        if len < FEATURES {
            return Err(fail(MvapStatus::BufferTooSmall, format!("need {FEATURES} slots")));
        }
        let st = EnvState {
            b_total_bits: s.b_total_bits,
            sinr_db: s.sinr_db,
            t_total_prev_s: s.t_total_prev_s,
            f_mvap_hz: s.f_mvap_hz,
            f_ecs_hz: s.f_ecs_hz,
        };
        let x = h.env.features(&st);
        ptr::copy_nonoverlapping(x.as_ptr(), out, FEATURES);
        Ok(())
    })
}

/// Creates a SINR chain over `n` states with a row-major `n x n` transition
/// matrix, starting in state `initial`.
///
/// # Safety
/// `states_db` valid for `n` doubles, `transition` for `n * n`; `out` valid.
/// Release with [`mvap_chain_free`].
#[no_mangle]
pub unsafe extern "C" fn mvap_chain_new(
    states_db: *const f64,
    transition: *const f64,
    n: usize,
    initial: usize,
    seed: u64,
    out: *mut *mut MvapChain,
) -> MvapStatus {
    guard(|| {
        if states_db.is_null() || transition.is_null() || out.is_null() {
            return Err(fail(MvapStatus::NullPointer, "null argument"));
        }
        let states = std::slice::from_raw_parts(states_db, n).to_vec();
        let flat = std::slice::from_raw_parts(transition, n * n);
        let rows = flat.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let chain = SinrChain::new(states, rows, initial).map_err(check)?;
        *out = Box::into_raw(Box::new(MvapChain {
            chain,
            rng: rng::stream(seed, "sinr"),
        }));
        Ok(())
    })
}

/// # Safety
/// `chain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvap_chain_free(chain: *mut MvapChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Advances one step; writes the new state index and its SINR in dB.
///
/// # Safety
/// `chain` must be a live handle; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn mvap_chain_step(chain: *mut MvapChain, index: *mut usize, sinr_db: *mut f64) -> MvapStatus {
    guard(|| {
        let Some(h) = chain.as_mut() else {
            return Err(fail(MvapStatus::NullPointer, "chain is null"));
        };
        let db = h.chain.step(&mut h.rng);
        if !index.is_null() {
            *index = h.chain.current_index();
        }
        if !sinr_db.is_null() {
            *sinr_db = db;
        }
        Ok(())
    })
}

fn record_out(r: &EpisodeRecord) -> MvapEpisodeRecord {
    MvapEpisodeRecord {
        episode: r.episode as u64,
        reward_total: r.reward_total,
        reward_mean: r.reward_mean,
        violations: r.violations as u64,
        mean_t_total: r.mean_t_total,
        epsilon: r.epsilon,
    }
}

/// Trains one algorithm for `episodes` episodes (0 keeps the config value)
/// with `seed`, writing one record per episode into `out`. `written`
/// receives the number of records. Fails with `BufferTooSmall` (and sets
/// `written` to the required count) if `cap` is too small.
///
/// # Safety
/// `config_toml` null or NUL-terminated; `out` valid for `cap` records;
/// `written` valid.
#[no_mangle]
pub unsafe extern "C" fn mvap_train(
    config_toml: *const c_char,
    algorithm: MvapAlgorithm,
    seed: u64,
    episodes: usize,
    out: *mut MvapEpisodeRecord,
    cap: usize,
    written: *mut usize,
) -> MvapStatus {
    guard(|| {
        if written.is_null() || (out.is_null() && cap > 0) {
            return Err(fail(MvapStatus::NullPointer, "null argument"));
        }
        let mut cfg = experiment(config_toml)?;
        if episodes > 0 {
            cfg.run.episodes = episodes;
        }
        *written = cfg.run.episodes;
        if cap < cfg.run.episodes {
            return Err(fail(
                MvapStatus::BufferTooSmall,
                format!("need room for {} records", cfg.run.episodes),
            ));
        }
        let algo = match algorithm {
            MvapAlgorithm::Ql => Algorithm::Ql,
            MvapAlgorithm::Dqn => Algorithm::Dqn,
            MvapAlgorithm::Ddqn => Algorithm::Ddqn,
            MvapAlgorithm::Rm => Algorithm::Rm,
        };
        let records = run_cell(&cfg.env, &cfg, algo, seed).map_err(check)?;
        for (i, r) in records.iter().enumerate() {
            *out.add(i) = record_out(r);
        }
        *written = records.len();
        Ok(())
    })
}
