use std::ffi::{CStr, CString};
use std::ptr;

use maximin_norms_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mn_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn gini_and_errors() {
    let v = [1.0, 0.0, 0.0, 0.0];
    let mut g = -1.0;
    assert_eq!(unsafe { mn_gini(v.as_ptr(), v.len(), &mut g) }, MN_OK);
    assert_eq!(g, 0.75);

    let bad = [-1.0, 2.0];
    assert_eq!(unsafe { mn_gini(bad.as_ptr(), 2, &mut g) }, MN_ERR_INVALID);
    assert!(last_error().contains("non-negative"));

    assert_eq!(unsafe { mn_gini(ptr::null(), 3, &mut g) }, MN_ERR_NULL);
    assert_eq!(unsafe { mn_gini(v.as_ptr(), 4, ptr::null_mut()) }, MN_ERR_NULL);
}

#[test]
fn statistics() {
    let a = [1.0, 2.0, 3.0];
    let b = [4.0, 5.0, 6.0];
    let (mut u, mut p) = (0.0, 0.0);
    assert_eq!(
        unsafe { mn_mann_whitney(a.as_ptr(), 3, b.as_ptr(), 3, &mut u, &mut p) },
        MN_OK
    );
    assert_eq!(u, 0.0);
    assert!((p - 0.1).abs() < 1e-12);
    assert_eq!(
        unsafe { mn_mann_whitney(a.as_ptr(), 0, b.as_ptr(), 3, &mut u, &mut p) },
        MN_ERR_INVALID
    );

    let mut d = 0.0;
    assert_eq!(unsafe { mn_cohens_d_from_summary(7.18, 0.23, 10.82, 1.65, &mut d) }, MN_OK);
    assert!((d - 3.09).abs() < 0.01);
    let flat = [1.0, 1.0];
    let other = [2.0, 2.0];
    assert_eq!(
        unsafe { mn_cohens_d(flat.as_ptr(), 2, other.as_ptr(), 2, &mut d) },
        MN_ERR_UNDEFINED
    );
    assert_eq!(unsafe { mn_cohens_d(a.as_ptr(), 3, b.as_ptr(), 3, &mut d) }, MN_OK);
    assert!((d - 3.0).abs() < 1e-12);
}

#[test]
fn config_handles() {
    let bogus = CString::new("orchard").unwrap();
    assert!(unsafe { mn_config_new(bogus.as_ptr()) }.is_null());
    assert!(last_error().contains("orchard"));
    assert!(unsafe { mn_config_new(ptr::null()) }.is_null());

    let missing = CString::new("/nonexistent/cfg.toml").unwrap();
    assert!(unsafe { mn_config_load(missing.as_ptr()) }.is_null());

    let scen = CString::new("allotment").unwrap();
    let cfg = unsafe { mn_config_new(scen.as_ptr()) };
    assert!(!cfg.is_null());
    let soc = CString::new("neither").unwrap();
    assert_eq!(unsafe { mn_config_set_society(cfg, soc.as_ptr()) }, MN_ERR_INVALID);
    unsafe { mn_config_free(cfg) };
    unsafe { mn_config_free(ptr::null_mut()) };
}

#[test]
fn simulation_steps_to_the_end() {
    let scen = CString::new("capabilities").unwrap();
    let cfg = unsafe { mn_config_new(scen.as_ptr()) };
    assert_eq!(unsafe { mn_config_set_t_max(cfg, 5) }, MN_OK);
    let rawle = CString::new("rawle").unwrap();
    let sim = unsafe { mn_simulation_new(cfg, rawle.as_ptr(), 3) };
    assert!(!sim.is_null());

    let mut m = MnStepMetrics::default();
    for _ in 0..5 {
        assert_eq!(unsafe { mn_simulation_step(sim, 0.5, 1, &mut m) }, MN_OK);
        assert!((0.0..=1.0).contains(&m.gini_wellbeing));
        assert!(m.welfare_wellbeing >= m.min_wellbeing);
    }
    assert_eq!(unsafe { mn_simulation_is_done(sim) }, 1);
    assert_eq!(
        unsafe { mn_simulation_step(sim, 0.5, 1, ptr::null_mut()) },
        MN_ERR_EPISODE_OVER
    );
    let mut steps = 0usize;
    assert_eq!(unsafe { mn_simulation_step_index(sim, &mut steps) }, MN_OK);
    assert_eq!(steps, 5);

    let mut u = [0.0; 4];
    let mut n = 0usize;
    assert_eq!(unsafe { mn_simulation_wellbeing(sim, u.as_mut_ptr(), 4, &mut n) }, MN_OK);
    assert_eq!(n, 4);
    assert!(u.iter().all(|&w| w > 0.0));
    assert_eq!(
        unsafe { mn_simulation_wellbeing(sim, u.as_mut_ptr(), 2, &mut n) },
        MN_ERR_INVALID
    );

    assert_eq!(unsafe { mn_simulation_reset(sim) }, MN_OK);
    assert_eq!(unsafe { mn_simulation_is_done(sim) }, 0);
    assert_eq!(unsafe { mn_simulation_step(sim, 2.0, 0, &mut m) }, MN_ERR_INVALID);

    unsafe {
        mn_simulation_free(sim);
        mn_config_free(cfg);
    }
}

#[test]
fn run_experiment_writes_files() {
    let scen = CString::new("capabilities").unwrap();
    let cfg = unsafe { mn_config_new(scen.as_ptr()) };
    unsafe {
        assert_eq!(mn_config_set_episodes(cfg, 1, 2), MN_OK);
        assert_eq!(mn_config_set_t_max(cfg, 5), MN_OK);
        assert_eq!(mn_config_set_seed(cfg, 9, 1), MN_OK);
    }
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mn_run_experiment(cfg, out.as_ptr()) }, MN_OK);
    assert!(dir.path().join("stats.csv").exists());
    assert!(dir.path().join("norms_maximin.txt").exists());

    unsafe { mn_config_set_episodes(cfg, 1, 0) };
    assert_eq!(unsafe { mn_run_experiment(cfg, out.as_ptr()) }, MN_ERR_INVALID);
    assert!(last_error().contains("eval_episodes"));
    unsafe { mn_config_free(cfg) };
}
