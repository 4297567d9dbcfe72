use std::ffi::{CStr, CString};
use std::ptr;

use ebcsl::config::presets;
use ebcsl_ffi::*;

fn micro_toml() -> CString {
    CString::new(presets::experiment(presets::micro(false)).to_toml_string()).unwrap()
}

fn new_env() -> *mut EbcslEnv {
    let mut env = ptr::null_mut();
    let status = unsafe { ebcsl_env_new_from_toml(micro_toml().as_ptr(), ptr::null(), &mut env) };
    assert_eq!(status, EbcslStatus::Ok);
    env
}

#[test]
fn episode_runs_through_the_c_interface() {
    let env = new_env();
    unsafe {
        assert_eq!(ebcsl_env_fleet_size(env), 2);
        let horizon = ebcsl_env_horizon(env);
        assert_eq!(horizon, 24);
        assert_eq!(ebcsl_env_reset(env, 5), EbcslStatus::Ok);
        let mut steps = 0;
        loop {
            let mut layover = [0u8; 2];
            let mut energy = [0.0; 2];
            let mut t = 0usize;
            assert_eq!(
                ebcsl_env_observe(env, energy.as_mut_ptr(), layover.as_mut_ptr(), 2, &mut t),
                EbcslStatus::Ok
            );
            assert_eq!(t, steps);
            let mut alloc = [0u8; 2];
            let mut powers = [0.0; 2];
            if let Some(m) = layover.iter().position(|&b| b == 1) {
                alloc[m] = 1;
                let (mut lo, mut hi) = (0.0, 0.0);
                assert_eq!(ebcsl_env_power_range(env, m, 1, &mut lo, &mut hi), EbcslStatus::Ok);
                powers[m] = hi;
            }
            let mut out = EbcslStepResult::default();
            assert_eq!(
                ebcsl_env_step(env, alloc.as_ptr(), powers.as_ptr(), 2, &mut out),
                EbcslStatus::Ok
            );
            assert!(out.reward.is_finite() && out.safety_cost >= 0.0);
            steps += 1;
            if out.done != 0 {
                break;
            }
        }
        assert_eq!(steps, horizon);
        let status = ebcsl_env_step(env, [0u8; 2].as_ptr(), [0.0; 2].as_ptr(), 2, ptr::null_mut());
        assert_eq!(status, EbcslStatus::NoEpisode);
        ebcsl_env_free(env);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut env = ptr::null_mut();
        let bad = CString::new("schema_version = 99").unwrap();
        assert_eq!(
            ebcsl_env_new_from_toml(bad.as_ptr(), ptr::null(), &mut env),
            EbcslStatus::Config
        );
        assert!(env.is_null());
        let msg = CStr::from_ptr(ebcsl_last_error()).to_str().unwrap();
        assert!(!msg.is_empty());

        assert_eq!(
            ebcsl_env_new_from_toml(ptr::null(), ptr::null(), &mut env),
            EbcslStatus::NullPointer
        );
        let missing = CString::new("/nonexistent/config.toml").unwrap();
        assert_eq!(ebcsl_env_new_from_file(missing.as_ptr(), &mut env), EbcslStatus::Io);

        let env = new_env();
        assert_eq!(ebcsl_env_reset(env, 1), EbcslStatus::Ok);
        let mut out = EbcslStepResult::default();
        let wrong_len = ebcsl_env_step(env, [0u8; 3].as_ptr(), [0.0; 3].as_ptr(), 3, &mut out);
        assert_eq!(wrong_len, EbcslStatus::InvalidArgument);
        // both buses at the terminal, one charger
        let over = ebcsl_env_step(env, [1u8, 1].as_ptr(), [0.0; 2].as_ptr(), 2, &mut out);
        assert_eq!(over, EbcslStatus::Contract);
        ebcsl_env_free(env);
        ebcsl_env_free(ptr::null_mut());
    }
}

#[test]
fn pure_functions_match_the_library() {
    let c = ebcsl_charging_cost(0.03921, 197.08, 0.0, 0.8, 1.0 / 6.0);
    assert!((c - 1.2879178).abs() < 1e-9);
    let r = ebcsl_charging_cost(0.03921, 0.0, 80.0, 0.8, 1.0 / 6.0);
    assert!((r + 0.41824).abs() < 1e-9);
    assert!((ebcsl_dual_step(0.5, 0.01, 0.125, 0.025) - 0.501).abs() < 1e-12);
    assert_eq!(ebcsl_dual_step(0.0, 0.01, 0.0, 0.025), 0.0);
    let e = [40.0, 50.0, 47.5];
    assert!((unsafe { ebcsl_safety_shortfall(e.as_ptr(), 3, 48.0) } - 8.5).abs() < 1e-12);
}

#[test]
fn policy_round_trips_through_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.bin");
    let cfg = presets::experiment(presets::micro(false));
    let sc = cfg.scenario.resolve(std::path::Path::new(".")).unwrap().into_shared();
    let trainer = ebcsl::trainer::Trainer::new(sc, cfg.train.clone()).unwrap();
    trainer.save(&path).unwrap();
    let env = new_env();
    unsafe {
        let mut policy = ptr::null_mut();
        let p = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(ebcsl_policy_load(p.as_ptr(), env, 12, &mut policy), EbcslStatus::Ok);
        assert_eq!(ebcsl_env_reset(env, 3), EbcslStatus::Ok);
        for _ in 0..24 {
            let mut alloc = [0u8; 2];
            let mut powers = [0.0; 2];
            assert_eq!(
                ebcsl_policy_act(policy, env, alloc.as_mut_ptr(), powers.as_mut_ptr(), 2),
                EbcslStatus::Ok
            );
            let mut out = EbcslStepResult::default();
            assert_eq!(
                ebcsl_env_step(env, alloc.as_ptr(), powers.as_ptr(), 2, &mut out),
                EbcslStatus::Ok
            );
        }
        let garbage = dir.path().join("garbage.bin");
        std::fs::write(&garbage, b"not a checkpoint").unwrap();
        let g = CString::new(garbage.to_str().unwrap()).unwrap();
        let mut other = ptr::null_mut();
        assert_eq!(
            ebcsl_policy_load(g.as_ptr(), env, 12, &mut other),
            EbcslStatus::Checkpoint
        );
        ebcsl_policy_free(policy);
        ebcsl_env_free(env);
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let exe = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("ebcsl_smoke");
    // the static archive sits next to the test binary's deps directory
    let test_exe = std::env::current_exe().unwrap();
    let lib_dir = test_exe.parent().unwrap().parent().unwrap();
    if !lib_dir.join("libebcsl_ffi.a").exists() {
        eprintln!("static library not built; skipped");
        return;
    }
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(format!("{dir}/tests/c/smoke.c"))
        .arg(format!("-I{dir}/include"))
        .arg(lib_dir.join("libebcsl_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = std::process::Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
