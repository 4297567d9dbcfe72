//! C interface to the fleet simulator, the cost functions and trained
//! policies.
//!
//! Handles are opaque pointers created by `*_new`/`*_load` and released by
//! the matching `*_free`. Every fallible call returns an [`EbcslStatus`];
//! on failure the message is available from [`ebcsl_last_error`] until the
//! next failing call on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use ebcsl::config::{ExperimentConfig, Scenario, SystemParams};
use ebcsl::env::{charging_cost, Allocation, FleetEnv, GlobalState};
use ebcsl::options::HierarchicalPolicy;
use ebcsl::trainer::{dual_step, DacPolicy, PolicyNets};
use ebcsl::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbcslStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Contract = 5,
    Infeasible = 6,
    Checkpoint = 7,
    /// The call was made before `ebcsl_env_reset` or after the episode ended.
    NoEpisode = 8,
    Internal = 9,
}

/// Simulator with its current state and random stream.
pub struct EbcslEnv {
    env: FleetEnv,
    state: Option<GlobalState>,
    forced: bool,
    rng: ChaCha8Rng,
}

/// Frozen policy loaded from a checkpoint.
pub struct EbcslPolicy {
    policy: DacPolicy,
}

/// Outcome of one step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EbcslStepResult {
    pub reward: f64,
    pub safety_cost: f64,
    /// Non-zero once the horizon is reached.
    pub done: u8,
    /// Non-zero when some bus changed status.
    pub forced_termination: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> EbcslStatus {
    match e {
        Error::Io { .. } => EbcslStatus::Io,
        Error::Parse { .. } | Error::MissingInterval { .. } | Error::Config(_) => EbcslStatus::Config,
        Error::Contract(_) | Error::Dimension { .. } | Error::Domain(_) | Error::NonFinite(_) => EbcslStatus::Contract,
        Error::EnumerationCap { .. } => EbcslStatus::Contract,
        Error::Infeasible(_) => EbcslStatus::Infeasible,
        Error::Checkpoint(_) => EbcslStatus::Checkpoint,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (EbcslStatus, String)>) -> EbcslStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EbcslStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EbcslStatus::Internal
        }
    }
}

fn lift(e: Error) -> (EbcslStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EbcslStatus, String) {
    (EbcslStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EbcslStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (EbcslStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn scenario_from(cfg: ExperimentConfig, base: &Path) -> Result<Arc<Scenario>, (EbcslStatus, String)> {
    cfg.validate().map_err(lift)?;
    Ok(cfg.scenario.resolve(base).map_err(lift)?.into_shared())
}

fn boxed_env(scenario: Arc<Scenario>, out: *mut *mut EbcslEnv) -> Result<(), (EbcslStatus, String)> {
    let env = FleetEnv::new(scenario).map_err(lift)?;
    let handle = Box::new(EbcslEnv {
        env,
        state: None,
        forced: true,
        rng: ChaCha8Rng::seed_from_u64(0),
    });
    unsafe { *out = Box::into_raw(handle) };
    Ok(())
}

/// Last error message of the calling thread; valid until the next failing
/// call on that thread.
#[no_mangle]
pub extern "C" fn ebcsl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a simulator from an experiment file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_env_new_from_file(path: *const c_char, out: *mut *mut EbcslEnv) -> EbcslStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = Path::new(str_arg(path, "path")?);
        let cfg = ExperimentConfig::load(path).map_err(lift)?;
        boxed_env(scenario_from(cfg, path.parent().unwrap_or(Path::new(".")))?, out)
    })
}

/// Creates a simulator from experiment TOML text; relative trace paths
/// resolve against `base_dir`, or the working directory when null.
///
/// # Safety
/// `toml` (and `base_dir` when non-null) must be NUL-terminated strings and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_env_new_from_toml(
    toml: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut EbcslEnv,
) -> EbcslStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(toml, "toml")?;
        let base = if base_dir.is_null() {
            "."
        } else {
            str_arg(base_dir, "base_dir")?
        };
        let cfg = ExperimentConfig::from_toml_str(text).map_err(lift)?;
        boxed_env(scenario_from(cfg, Path::new(base))?, out)
    })
}

/// # Safety
/// `env` must come from an `ebcsl_env_new_*` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_env_free(env: *mut EbcslEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of buses, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_env_fleet_size(env: *const EbcslEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.fleet_size())
}

/// Steps per episode, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_env_horizon(env: *const EbcslEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.horizon())
}

/// Starts an episode on the random stream `seed`.
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_env_reset(env: *mut EbcslEnv, seed: u64) -> EbcslStatus {
    guard(|| {
        let e = env.as_mut().ok_or_else(|| null("env"))?;
        e.rng = ChaCha8Rng::seed_from_u64(seed);
        e.state = Some(e.env.reset(&mut e.rng));
        e.forced = true;
        Ok(())
    })
}

fn current(e: &EbcslEnv) -> Result<&GlobalState, (EbcslStatus, String)> {
    e.state
        .as_ref()
        .filter(|s| !e.env.is_terminal(s))
        .ok_or((EbcslStatus::NoEpisode, "no running episode".into()))
}

fn check_len(len: usize, e: &EbcslEnv) -> Result<(), (EbcslStatus, String)> {
    if len != e.env.fleet_size() {
        return Err((
            EbcslStatus::InvalidArgument,
            format!("buffer length {len}, fleet size {}", e.env.fleet_size()),
        ));
    }
    Ok(())
}

/// Copies per-bus energy (kWh) and status (1 = at the terminal) of the
/// current state; either output may be null.
///
/// # Safety
/// Non-null outputs must hold `len` elements; `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_env_observe(
    env: *const EbcslEnv,
    energy_kwh: *mut f64,
    layover: *mut u8,
    len: usize,
    t: *mut usize,
) -> EbcslStatus {
    guard(|| {
        let e = env.as_ref().ok_or_else(|| null("env"))?;
        check_len(len, e)?;
        let s = e
            .state
            .as_ref()
            .ok_or((EbcslStatus::NoEpisode, "no running episode".into()))?;
        for (m, l) in s.locals.iter().enumerate() {
            if !energy_kwh.is_null() {
                *energy_kwh.add(m) = l.energy_kwh;
            }
            if !layover.is_null() {
                *layover.add(m) = l.layover as u8;
            }
        }
        if !t.is_null() {
            *t = s.t;
        }
        Ok(())
    })
}

/// Feasible power interval of bus `m` in the current state.
///
/// # Safety
/// `env` must be a live handle; `lo` and `hi` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_env_power_range(
    env: *const EbcslEnv,
    m: usize,
    allocated: u8,
    lo: *mut f64,
    hi: *mut f64,
) -> EbcslStatus {
    guard(|| {
        let e = env.as_ref().ok_or_else(|| null("env"))?;
        if lo.is_null() || hi.is_null() {
            return Err(null("output"));
        }
        let s = current(e)?;
        if m >= e.env.fleet_size() {
            return Err((EbcslStatus::InvalidArgument, format!("bus {m} out of range")));
        }
        let r = e.env.power_range(s, m, allocated != 0);
        *lo = r.lo;
        *hi = r.hi;
        Ok(())
    })
}

/// Advances one step. `alloc[m]` non-zero assigns a charger to bus `m`;
/// `powers[m]` is read only for allocated buses.
///
/// # Safety
/// `alloc` and `powers` must hold `len` elements; `env` must be a live
/// handle; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_env_step(
    env: *mut EbcslEnv,
    alloc: *const u8,
    powers: *const f64,
    len: usize,
    out: *mut EbcslStepResult,
) -> EbcslStatus {
    guard(|| {
        let e = env.as_mut().ok_or_else(|| null("env"))?;
        if alloc.is_null() || powers.is_null() {
            return Err(null("input"));
        }
        check_len(len, e)?;
        let s = current(e)?.clone();
        let a = Allocation::from_bits(std::slice::from_raw_parts(alloc, len).iter().map(|&b| b != 0).collect());
        let p = std::slice::from_raw_parts(powers, len);
        let step = e.env.step(&s, &a, p, &mut e.rng).map_err(lift)?;
        let done = e.env.is_terminal(&step.next_state);
        if !out.is_null() {
            *out = EbcslStepResult {
                reward: step.reward,
                safety_cost: step.safety_cost,
                done: done as u8,
                forced_termination: step.forced_termination as u8,
            };
        }
        e.forced = step.forced_termination;
        e.state = Some(step.next_state);
        Ok(())
    })
}

/// Charging cost of one step: `price (p_buy - sell_discount p_sell) dt`.
#[no_mangle]
pub extern "C" fn ebcsl_charging_cost(price: f64, p_buy: f64, p_sell: f64, sell_discount: f64, dt_hours: f64) -> f64 {
    let params = SystemParams {
        fleet_size: 1,
        chargers: 1,
        e_bat: 1.0,
        soc_min: 0.0,
        soc_max: 1.0,
        p_ch_max: 0.0,
        p_dis_max: 0.0,
        dt_hours,
        sell_discount,
        zeta_b: 0.0,
        zeta_s: 0.0,
        bk_slope: 0.0,
    };
    charging_cost(price, p_buy, p_sell, &params)
}

/// Energy shortfall below `floor_kwh`, summed over `len` buses.
///
/// # Safety
/// `energy_kwh` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_safety_shortfall(energy_kwh: *const f64, len: usize, floor_kwh: f64) -> f64 {
    if energy_kwh.is_null() {
        return f64::NAN;
    }
    std::slice::from_raw_parts(energy_kwh, len)
        .iter()
        .map(|e| (floor_kwh - e).max(0.0))
        .sum()
}

/// Projected multiplier step `max(0, lambda + lr (j_safe - tolerance))`.
#[no_mangle]
pub extern "C" fn ebcsl_dual_step(lambda: f64, lr: f64, j_safe: f64, tolerance: f64) -> f64 {
    dual_step(lambda, lr, j_safe, tolerance)
}

/// Loads a policy bundle for the scenario of `env`.
///
/// # Safety
/// `path` must be a NUL-terminated string, `env` a live handle and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_policy_load(
    path: *const c_char,
    env: *const EbcslEnv,
    enumeration_cap: usize,
    out: *mut *mut EbcslPolicy,
) -> EbcslStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let e = env.as_ref().ok_or_else(|| null("env"))?;
        let (nets, _) = PolicyNets::load(str_arg(path, "path")?).map_err(lift)?;
        let scenario = e.env.scenario().clone();
        nets.check_fits(&scenario).map_err(lift)?;
        let policy = DacPolicy::new(Arc::new(nets), scenario, enumeration_cap, true);
        *out = Box::into_raw(Box::new(EbcslPolicy { policy }));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from `ebcsl_policy_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_policy_free(policy: *mut EbcslPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Greedy allocation and powers for the current state of `env`, ready to
/// pass to `ebcsl_env_step`. Draws from the random stream of `env`.
///
/// # Safety
/// `alloc` and `powers` must hold `len` elements; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ebcsl_policy_act(
    policy: *const EbcslPolicy,
    env: *mut EbcslEnv,
    alloc: *mut u8,
    powers: *mut f64,
    len: usize,
) -> EbcslStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| null("policy"))?;
        let e = env.as_mut().ok_or_else(|| null("env"))?;
        if alloc.is_null() || powers.is_null() {
            return Err(null("output"));
        }
        check_len(len, e)?;
        let s = current(e)?.clone();
        let a = p.policy.sample_high(&s, e.forced, &mut e.rng).map_err(lift)?;
        let pw = p.policy.low_powers(&s, &a, &mut e.rng).map_err(lift)?;
        for m in 0..len {
            *alloc.add(m) = a.get(m) as u8;
            *powers.add(m) = pw[m];
        }
        Ok(())
    })
}
