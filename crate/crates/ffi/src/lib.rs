//! C ABI over the simulator.
//!
//! Every fallible function returns an `int32_t` status, `MN_OK` on success.
//! On failure a message for the calling thread is available from
//! [`mn_last_error`] until the next failing call. Handles are opaque and
//! must be released with their `_free` function; passing NULL to a `_free`
//! function is a no-op.
//!
//! The header `include/maximin_norms.h` is generated by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use maximin_norms::config::{parse_societies, ConfigFile, Scenario, SimConfig, Society};
use maximin_norms::experiment::{self, ExperimentConfig, SocietyRun, StepMetrics};
use maximin_norms::SimError;

pub const MN_OK: i32 = 0;
/// A required pointer was NULL.
pub const MN_ERR_NULL: i32 = 1;
/// Invalid argument, configuration or contract violation.
pub const MN_ERR_INVALID: i32 = 2;
pub const MN_ERR_IO: i32 = 3;
/// Training produced a non-finite loss.
pub const MN_ERR_TRAINING: i32 = 4;
/// The quantity is undefined for these inputs (e.g. zero pooled SD).
pub const MN_ERR_UNDEFINED: i32 = 5;
/// The episode has ended; reset before stepping again.
pub const MN_ERR_EPISODE_OVER: i32 = 6;
/// Internal panic caught at the boundary.
pub const MN_ERR_PANIC: i32 = 7;

/// Experiment configuration handle.
pub struct MnConfig {
    inner: ExperimentConfig,
}

/// One society advanced step by step.
pub struct MnSimulation {
    cfg: ExperimentConfig,
    run: SocietyRun,
}

/// Measurements over alive agents after one step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MnStepMetrics {
    pub gini_wellbeing: f64,
    pub min_wellbeing: f64,
    pub welfare_wellbeing: f64,
    pub gini_resource: f64,
    pub min_resource: f64,
    pub welfare_resource: f64,
}

impl From<StepMetrics> for MnStepMetrics {
    fn from(m: StepMetrics) -> Self {
        MnStepMetrics {
            gini_wellbeing: m.wellbeing.gini,
            min_wellbeing: m.wellbeing.min,
            welfare_wellbeing: m.wellbeing.welfare,
            gini_resource: m.resource.gini,
            min_resource: m.resource.min,
            welfare_resource: m.resource.welfare,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(i32, String);

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::Io { .. } | SimError::Csv { .. } => MN_ERR_IO,
            SimError::Training(_) => MN_ERR_TRAINING,
            _ => MN_ERR_INVALID,
        };
        Failure(code, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MN_OK,
        Ok(Err(Failure(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            MN_ERR_PANIC
        }
    }
}

fn guard_ptr<T>(f: impl FnOnce() -> Result<T, Failure>) -> *mut T {
    let mut out = ptr::null_mut();
    guard(|| {
        out = Box::into_raw(Box::new(f()?));
        Ok(())
    });
    out
}

fn null(what: &str) -> Failure {
    Failure(MN_ERR_NULL, format!("{what} is NULL"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(MN_ERR_INVALID, format!("{what} is not UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread, empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `values` must point to `len` doubles; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mn_gini(values: *const f64, len: usize, result: *mut f64) -> i32 {
    guard(|| {
        let v = slice(values, len, "values")?;
        *out(result, "result")? = experiment::gini(v)?;
        Ok(())
    })
}

/// Two-sided Mann-Whitney test; `u` is the statistic of sample `a`.
///
/// # Safety
/// `a` and `b` must point to `len_a` and `len_b` doubles; `u` and `p` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn mn_mann_whitney(
    a: *const f64,
    len_a: usize,
    b: *const f64,
    len_b: usize,
    u: *mut f64,
    p: *mut f64,
) -> i32 {
    guard(|| {
        let r = experiment::mann_whitney_u(slice(a, len_a, "a")?, slice(b, len_b, "b")?)?;
        *out(u, "u")? = r.u;
        *out(p, "p")? = r.p;
        Ok(())
    })
}

/// # Safety
/// As for [`mn_mann_whitney`]; `d` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mn_cohens_d(
    a: *const f64,
    len_a: usize,
    b: *const f64,
    len_b: usize,
    d: *mut f64,
) -> i32 {
    guard(|| {
        let d_out = out(d, "d")?;
        match experiment::cohens_d(slice(a, len_a, "a")?, slice(b, len_b, "b")?)? {
            Some(v) => {
                *d_out = v;
                Ok(())
            }
            None => Err(Failure(MN_ERR_UNDEFINED, "pooled standard deviation is zero".into())),
        }
    })
}

/// Cohen's d of two equal-size groups given as mean and SD.
///
/// # Safety
/// `d` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mn_cohens_d_from_summary(
    mean_a: f64,
    sd_a: f64,
    mean_b: f64,
    sd_b: f64,
    d: *mut f64,
) -> i32 {
    guard(|| {
        let d_out = out(d, "d")?;
        match experiment::cohens_d_from_summary(mean_a, sd_a, mean_b, sd_b) {
            Some(v) => {
                *d_out = v;
                Ok(())
            }
            None => Err(Failure(MN_ERR_UNDEFINED, "pooled standard deviation is zero".into())),
        }
    })
}

/// Default configuration for `"capabilities"` or `"allotment"`. NULL on
/// failure.
///
/// # Safety
/// `scenario` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mn_config_new(scenario: *const c_char) -> *mut MnConfig {
    guard_ptr(|| {
        let scenario: Scenario = string(scenario, "scenario")?.parse()?;
        let inner = ExperimentConfig {
            sim: SimConfig::for_scenario(scenario),
            ..ExperimentConfig::default()
        };
        Ok(MnConfig { inner })
    })
}

/// Defaults overlaid with a flat key-value config file. NULL on failure.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mn_config_load(path: *const c_char) -> *mut MnConfig {
    guard_ptr(|| {
        let path = PathBuf::from(string(path, "path")?);
        let mut inner = ExperimentConfig::default();
        ConfigFile::load(&path)?.apply(&mut inner)?;
        Ok(MnConfig { inner })
    })
}

/// # Safety
/// `cfg` must come from `mn_config_new` or `mn_config_load`.
#[no_mangle]
pub unsafe extern "C" fn mn_config_set_episodes(cfg: *mut MnConfig, train: usize, eval: usize) -> i32 {
    guard(|| {
        let c = &mut out(cfg, "cfg")?.inner;
        c.train_episodes = train;
        c.eval_episodes = eval;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn mn_config_set_seed(cfg: *mut MnConfig, seed: u64, replicates: usize) -> i32 {
    guard(|| {
        let c = &mut out(cfg, "cfg")?.inner;
        c.sim.seed = seed;
        c.replicates = replicates;
        Ok(())
    })
}

/// `"baseline"`, `"rawle"` or `"both"`.
///
/// # Safety
/// `cfg` must be a live config handle and `society` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mn_config_set_society(cfg: *mut MnConfig, society: *const c_char) -> i32 {
    guard(|| {
        let c = &mut out(cfg, "cfg")?.inner;
        c.societies = parse_societies(&string(society, "society")?)?;
        c.sim.society = c.societies[0];
        Ok(())
    })
}

/// Set `t_max`, the step limit of an episode.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn mn_config_set_t_max(cfg: *mut MnConfig, t_max: usize) -> i32 {
    guard(|| {
        out(cfg, "cfg")?.inner.sim.t_max = t_max;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mn_config_free(cfg: *mut MnConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Train, evaluate and write all result files to `out_dir`.
///
/// # Safety
/// `cfg` must be a live config handle and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mn_run_experiment(cfg: *const MnConfig, out_dir: *const c_char) -> i32 {
    guard(|| {
        let c = &cfg.as_ref().ok_or_else(|| null("cfg"))?.inner;
        let dir = PathBuf::from(string(out_dir, "out_dir")?);
        experiment::run_experiment(c)?.write(&dir)?;
        Ok(())
    })
}

/// A fresh society (`"baseline"` or `"rawle"`) on its first grid. The
/// configuration is copied. NULL on failure.
///
/// # Safety
/// `cfg` must be a live config handle and `society` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mn_simulation_new(
    cfg: *const MnConfig,
    society: *const c_char,
    seed: u64,
) -> *mut MnSimulation {
    guard_ptr(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?.inner.clone();
        cfg.validate()?;
        let society: Society = string(society, "society")?.parse()?;
        let run = SocietyRun::new(&cfg, society, seed)?;
        Ok(MnSimulation { cfg, run })
    })
}

/// Advance one step. With `train` nonzero the agents learn; `epsilon` is
/// the exploration rate. `metrics` may be NULL. Returns
/// `MN_ERR_EPISODE_OVER` once the episode has ended.
///
/// # Safety
/// `sim` must be a live simulation handle; `metrics` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mn_simulation_step(
    sim: *mut MnSimulation,
    epsilon: f64,
    train: i32,
    metrics: *mut MnStepMetrics,
) -> i32 {
    guard(|| {
        let s = out(sim, "sim")?;
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Failure(MN_ERR_INVALID, "epsilon must lie in [0, 1]".into()));
        }
        match s.run.step(&s.cfg, epsilon, train != 0)? {
            Some(m) => {
                if let Some(dst) = metrics.as_mut() {
                    *dst = m.into();
                }
                Ok(())
            }
            None => Err(Failure(MN_ERR_EPISODE_OVER, "episode is over".into())),
        }
    })
}

/// Start a new episode; networks and replay memories are kept.
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn mn_simulation_reset(sim: *mut MnSimulation) -> i32 {
    guard(|| {
        out(sim, "sim")?.run.reset_episode()?;
        Ok(())
    })
}

/// Nonzero once the current episode has ended; 0 otherwise or for NULL.
///
/// # Safety
/// `sim` must be NULL or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn mn_simulation_is_done(sim: *const MnSimulation) -> i32 {
    sim.as_ref().map_or(0, |s| i32::from(s.run.is_done()))
}

/// Steps completed in the current episode.
///
/// # Safety
/// `sim` must be a live simulation handle; `steps` writable.
#[no_mangle]
pub unsafe extern "C" fn mn_simulation_step_index(sim: *const MnSimulation, steps: *mut usize) -> i32 {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        *out(steps, "steps")? = s.run.state.step;
        Ok(())
    })
}

/// Write each agent's well-being (0 for dead agents) into `values`, which
/// holds `capacity` doubles. `written` receives the number of agents; if it
/// exceeds `capacity` nothing is copied and `MN_ERR_INVALID` is returned.
///
/// # Safety
/// `sim` must be a live simulation handle, `values` must hold `capacity`
/// doubles and `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mn_simulation_wellbeing(
    sim: *const MnSimulation,
    values: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> i32 {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        let u = s.run.state.wellbeing_vector(&s.run.sim);
        *out(written, "written")? = u.len();
        if u.len() > capacity {
            return Err(Failure(
                MN_ERR_INVALID,
                format!("capacity {capacity} is below the {} agents", u.len()),
            ));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        std::slice::from_raw_parts_mut(values, u.len()).copy_from_slice(&u);
        Ok(())
    })
}

/// # Safety
/// `sim` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mn_simulation_free(sim: *mut MnSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
