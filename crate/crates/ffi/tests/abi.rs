use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use gauge_arb_ffi::*;

fn scenario_json(g: &[f64], r: &[f64], nt: usize) -> CString {
    let times: Vec<f64> = (0..nt).map(|i| i as f64 / (nt - 1) as f64).collect();
    let assets: Vec<serde_json::Value> = g
        .iter()
        .zip(r)
        .map(|(gj, rj)| {
            serde_json::json!({
                "deflator": times.iter().map(|t| (gj * t).exp()).collect::<Vec<_>>(),
                "short_rate": vec![*rj; nt],
            })
        })
        .collect();
    let doc = serde_json::json!({
        "time_grid": times,
        "assets": assets,
        "portfolio_domain": vec![[0.5, 1.5]; g.len()],
    });
    CString::new(doc.to_string()).unwrap()
}

fn load(json: &CString) -> *mut GaScenario {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ga_scenario_from_json(json.as_ptr(), &mut s) }, GaStatus::Ok);
    assert!(!s.is_null());
    s
}

fn last_code() -> String {
    let p = ga_last_error_code();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ga_version()) }.to_str().unwrap();
    assert_eq!(v, gauge_arb::VERSION);
}

#[test]
fn scenario_queries() {
    let s = load(&scenario_json(&[0.05, 0.02], &[0.01, 0.03], 9));
    let mut n = 0usize;
    assert_eq!(unsafe { ga_scenario_asset_count(s, &mut n) }, GaStatus::Ok);
    assert_eq!(n, 2);
    assert_eq!(unsafe { ga_scenario_time_count(s, &mut n) }, GaStatus::Ok);
    assert_eq!(n, 9);
    let x = [1.0, 1.0];
    let mut d = 0.0;
    assert_eq!(unsafe { ga_scenario_deflator(s, x.as_ptr(), 2, 0, &mut d) }, GaStatus::Ok);
    assert_eq!(d, 2.0);
    let mut r = 0.0;
    assert_eq!(unsafe { ga_scenario_short_rate(s, x.as_ptr(), 2, 0, &mut r) }, GaStatus::Ok);
    assert!((r - 0.02).abs() < 1e-15);
    assert_eq!(unsafe { ga_scenario_deflator(s, x.as_ptr(), 2, 99, &mut d) }, GaStatus::OutOfRange);
    assert_eq!(last_code(), "ffi.out_of_range");
    unsafe { ga_scenario_free(s) };
}

#[test]
fn errors_are_reported_not_raised() {
    let mut s = ptr::null_mut();
    let bad = CString::new("{\"portfolio_domain\": 3}").unwrap();
    assert_eq!(unsafe { ga_scenario_from_json(bad.as_ptr(), &mut s) }, GaStatus::ConfigInvalid);
    assert!(s.is_null());
    assert_eq!(last_code(), "cli.config_invalid");
    assert!(!ga_last_error_message().is_null());

    assert_eq!(unsafe { ga_scenario_from_json(ptr::null(), &mut s) }, GaStatus::NullPointer);
    let mut n = 0usize;
    assert_eq!(unsafe { ga_scenario_asset_count(ptr::null(), &mut n) }, GaStatus::NullPointer);

    // a singular domain is a numerical failure
    let s = load(&scenario_json(&[0.0], &[0.0], 3));
    let x = [0.0];
    let mut d = 0.0;
    assert_eq!(unsafe { ga_scenario_deflator(s, x.as_ptr(), 1, 0, &mut d) }, GaStatus::Numerical);
    assert_eq!(last_code(), "market_model.deflator_singular");
    unsafe { ga_scenario_free(s) };

    // success clears the previous error
    assert_eq!(unsafe { ga_scenario_asset_count(ptr::null(), &mut n) }, GaStatus::NullPointer);
    let s = load(&scenario_json(&[0.0], &[0.0], 3));
    assert!(ga_last_error_code().is_null());
    unsafe { ga_scenario_free(s) };
}

#[test]
fn zc_test_through_the_abi() {
    let alpha = [0.03, 0.04];
    let sigma = [0.1, 0.0, 0.0, 0.1];
    let r = [0.0, 0.0];
    let mut out = GaZcResult {
        residual: -1.0,
        tolerance: 0.0,
        rank: 0,
        is_zc: false,
    };
    let st = unsafe { ga_zc_test(alpha.as_ptr(), sigma.as_ptr(), r.as_ptr(), ptr::null(), 2, 2, &mut out) };
    assert_eq!(st, GaStatus::Ok);
    assert!(out.is_zc);
    assert_eq!(out.rank, 2);

    // rank one: (0.01, 0.02) leaves 0.01/sqrt(2) off the diagonal span
    let alpha = [0.01, 0.02];
    let sigma = [0.1, 0.1];
    let st = unsafe { ga_zc_test(alpha.as_ptr(), sigma.as_ptr(), r.as_ptr(), ptr::null(), 2, 1, &mut out) };
    assert_eq!(st, GaStatus::Ok);
    assert!(!out.is_zc);
    assert!((out.residual - 0.01 / 2f64.sqrt()).abs() < 1e-12);

    let st = unsafe { ga_zc_test(ptr::null(), sigma.as_ptr(), r.as_ptr(), ptr::null(), 2, 1, &mut out) };
    assert_eq!(st, GaStatus::NullPointer);
}

#[test]
fn spectrum_handles() {
    let free = load(&scenario_json(&[0.05], &[-0.05], 9));
    let arb = load(&scenario_json(&[0.01, 0.03], &[0.0, 0.0], 9));
    for (s, want) in [(free, GaVerdict::ArbitrageFree), (arb, GaVerdict::Arbitrage)] {
        let mut sp = ptr::null_mut();
        assert_eq!(unsafe { ga_spectrum_compute(s, 9, 3, 1e-10, 0.0, &mut sp) }, GaStatus::Ok);
        let mut n = 0usize;
        assert_eq!(unsafe { ga_spectrum_len(sp, &mut n) }, GaStatus::Ok);
        assert_eq!(n, 3);
        let mut v = GaVerdict::Inconclusive;
        assert_eq!(unsafe { ga_spectrum_verdict(sp, &mut v) }, GaStatus::Ok);
        assert_eq!(v, want);
        let mut lam = [0.0; 3];
        for (i, l) in lam.iter_mut().enumerate() {
            assert_eq!(unsafe { ga_spectrum_eigenvalue(sp, i, l) }, GaStatus::Ok);
        }
        assert!(lam[0] <= lam[1] && lam[1] <= lam[2]);
        let mut c = GaCompleteness::Incomplete;
        assert_eq!(unsafe { ga_spectrum_completeness(sp, &mut c) }, GaStatus::Ok);
        let mut kd = 9usize;
        assert_eq!(unsafe { ga_spectrum_kernel_dim(sp, &mut kd) }, GaStatus::Ok);
        match want {
            GaVerdict::ArbitrageFree => assert_eq!((c, kd), (GaCompleteness::Complete, 1)),
            _ => assert_eq!((c, kd), (GaCompleteness::NoKernel, 0)),
        }
        let mut e = 0.0;
        assert_eq!(unsafe { ga_spectrum_epsilon(sp, &mut e) }, GaStatus::Ok);
        assert!((e - 1e-8 * lam[1]).abs() <= 1e-20);
        assert_eq!(unsafe { ga_spectrum_eigenvalue(sp, 3, &mut e) }, GaStatus::OutOfRange);
        unsafe { ga_spectrum_free(sp) };
        unsafe { ga_scenario_free(s) };
    }
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gauge_arb.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["ga_scenario_from_json", "ga_spectrum_compute", "ga_zc_test", "GA_STATUS_OK"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ GaScenario *s = 0; GaStatus st = ga_scenario_from_json(\"{{}}\", &s); return st == GA_STATUS_OK; }}\n",
            header.display()
        ),
    )
    .unwrap();
    match Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).status() {
        Ok(st) => assert!(st.success(), "header fails to compile"),
        Err(e) => eprintln!("no C compiler available ({e}); syntax check skipped"),
    }
}
