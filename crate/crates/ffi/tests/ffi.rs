use boolean_flow_ffi::*;
use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(bf_last_error_message()) }.to_string_lossy().into_owned()
}

fn sample(lengths: &[f64], mu: f64) -> *mut BfSample {
    let mut s = ptr::null_mut();
    let st = unsafe { bf_sample_new(lengths.as_ptr(), lengths.len(), mu, 1e-6, &mut s) };
    assert_eq!(st, BfStatus::Ok, "{}", last_error());
    assert!(!s.is_null());
    s
}

#[test]
fn density_is_flat_between_t0_and_twice_t0() {
    // Interior arrivals inside (0, y - t0) followed by a gap of at least t0:
    // sum_k lambda^{k-1} z^{k-2}/(k-2)! e^{-lambda (y - t0)} e^{-lambda t0} = lambda e^{-lambda t0}.
    let (lambda, t0) = (0.3, 5.0);
    for y in [5.5, 7.0, 9.9] {
        let mut f = f64::NAN;
        assert_eq!(unsafe { bf_clump_density(y, lambda, t0, &mut f) }, BfStatus::Ok);
        let expected = lambda * (-lambda * t0).exp();
        assert!((f - expected).abs() < 1e-12 * expected, "y = {y}: {f} vs {expected}");
    }
}

#[test]
fn density_rejects_bad_arguments() {
    let mut f = 0.0;
    assert_eq!(unsafe { bf_clump_density(7.0, -1.0, 5.0, &mut f) }, BfStatus::Domain);
    assert!(last_error().contains("lambda"), "{}", last_error());
    // the point mass at t0 is not part of the continuous density
    assert_eq!(unsafe { bf_clump_density(5.0, 0.2, 5.0, &mut f) }, BfStatus::Domain);
    assert_eq!(unsafe { bf_clump_density(7.0, 0.2, 0.0, &mut f) }, BfStatus::InvalidArgument);
}

#[test]
fn m_estimate_inverts_the_mean_length() {
    // The mean clump length is expm1(lambda mu) / lambda; a sample with that mean
    // must give back lambda.
    let (lambda, mu) = (0.2_f64, 5.0_f64);
    let ybar = (lambda * mu).exp_m1() / lambda;
    let s = sample(&[mu, 2.0 * ybar - mu], mu);
    let mut n = 0usize;
    let mut mean = 0.0;
    assert_eq!(unsafe { bf_sample_stats(s, &mut n, &mut mean, ptr::null_mut()) }, BfStatus::Ok);
    assert_eq!(n, 2);
    assert!((mean - ybar).abs() < 1e-12);

    let mut est = ptr::null_mut();
    assert_eq!(unsafe { bf_m_estimate(s, &mut est) }, BfStatus::Ok, "{}", last_error());
    let mut lam = 0.0;
    assert_eq!(unsafe { bf_estimate_lambda(est, &mut lam) }, BfStatus::Ok);
    assert!((lam - lambda).abs() < 1e-10, "{lam}");
    let (mut se_dsl, mut se_g) = (0.0, 0.0);
    assert_eq!(unsafe { bf_estimate_se_dsl(est, &mut se_dsl) }, BfStatus::Ok);
    assert_eq!(unsafe { bf_estimate_se_g(est, &mut se_g) }, BfStatus::Ok);
    assert!(se_dsl > 0.0 && se_g > 0.0);
    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(unsafe { bf_estimate_ci_wald(est, &mut lo, &mut hi) }, BfStatus::Ok);
    let half = 1.959963984540054 * se_g;
    assert!((lo - (lam - half)).abs() < 1e-9 && (hi - (lam + half)).abs() < 1e-9);
    // the moment estimator has no likelihood-ratio interval
    assert_eq!(unsafe { bf_estimate_ci_lrt(est, &mut lo, &mut hi) }, BfStatus::Unavailable);
    unsafe {
        bf_estimate_free(est);
        bf_sample_free(s);
    }
}

#[test]
fn mle_gives_interval_containing_estimate() {
    // deterministic pseudo-sample: a mix of singletons and longer clumps
    let mu = 5.0;
    let lengths: Vec<f64> = (0..400).map(|i| if i % 3 == 0 { mu } else { mu + 0.5 + (i % 17) as f64 * 0.4 }).collect();
    let s = sample(&lengths, mu);
    let mut est = ptr::null_mut();
    assert_eq!(unsafe { bf_mle(s, 0, &mut est) }, BfStatus::Ok, "{}", last_error());
    let mut lam = 0.0;
    let (mut lo, mut hi) = (0.0, 0.0);
    unsafe {
        assert_eq!(bf_estimate_lambda(est, &mut lam), BfStatus::Ok);
        assert_eq!(bf_estimate_ci_lrt(est, &mut lo, &mut hi), BfStatus::Ok, "{}", last_error());
    }
    assert!(lam > 0.0 && lo < lam && lam < hi, "{lo} {lam} {hi}");
    unsafe {
        bf_estimate_free(est);
        bf_sample_free(s);
    }
}

#[test]
fn flow_estimates_match_closed_forms() {
    let (lambda, t0) = (0.2_f64, 5.0_f64);
    let mut a1 = 0.0;
    assert_eq!(unsafe { bf_a_hat_1(lambda, 10, t0, &mut a1) }, BfStatus::Ok);
    assert!((a1 - 10.0 * (lambda * t0).exp()).abs() < 1e-12);

    // on (t0, 2 t0] the expected count is 2 + lambda (y - t0)
    let mut m = 0.0;
    assert_eq!(unsafe { bf_conditional_order_mean(7.0, lambda, t0, &mut m) }, BfStatus::Ok);
    assert!((m - 2.4).abs() < 1e-12, "{m}");

    let s = sample(&[t0, 7.0, 9.0], t0);
    for interp in [0, 1] {
        let mut ab = 0.0;
        assert_eq!(unsafe { bf_a_hat_bayes(s, lambda, t0, interp, &mut ab) }, BfStatus::Ok, "{}", last_error());
        let expected = 1.0 + (2.0 + 0.4) + (2.0 + 0.8);
        assert!((ab - expected).abs() < 1e-9, "interp {interp}: {ab}");
    }
    unsafe { bf_sample_free(s) };
}

#[test]
fn null_pointers_and_empty_samples_are_reported() {
    let mut out = 0.0;
    assert_eq!(unsafe { bf_a_hat_bayes(ptr::null(), 0.2, 5.0, 0, &mut out) }, BfStatus::NullPointer);
    assert!(last_error().contains("sample"));
    assert_eq!(unsafe { bf_clump_density(7.0, 0.2, 5.0, ptr::null_mut()) }, BfStatus::NullPointer);

    let mut s = ptr::dangling_mut::<BfSample>();
    assert_eq!(unsafe { bf_sample_new(ptr::null(), 0, 5.0, 1e-6, &mut s) }, BfStatus::InvalidArgument);
    assert!(s.is_null(), "failed constructor must null the handle");
    assert_eq!(unsafe { bf_sample_new(ptr::null(), 3, 5.0, 1e-6, &mut s) }, BfStatus::NullPointer);

    // success clears the message
    assert_eq!(unsafe { bf_clump_density(7.0, 0.2, 5.0, &mut out) }, BfStatus::Ok);
    assert!(last_error().is_empty());

    unsafe {
        bf_sample_free(ptr::null_mut());
        bf_estimate_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(bf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/boolean_flow.h")
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(header_path()).expect("generated header");
    for name in [
        "BfStatus",
        "BF_STATUS_OK",
        "BF_STATUS_UNAVAILABLE",
        "typedef struct BfSample BfSample",
        "typedef struct BfEstimate BfEstimate",
        "bf_last_error_message",
        "bf_version",
        "bf_sample_new",
        "bf_sample_set_spacings",
        "bf_sample_stats",
        "bf_sample_free",
        "bf_clump_density",
        "bf_m_estimate",
        "bf_mle",
        "bf_estimate_lambda",
        "bf_estimate_se_dsl",
        "bf_estimate_se_g",
        "bf_estimate_ci_wald",
        "bf_estimate_ci_lrt",
        "bf_estimate_free",
        "bf_a_hat_1",
        "bf_conditional_order_mean",
        "bf_a_hat_bayes",
    ] {
        assert!(header.contains(name), "header is missing {name}");
    }
}

const C_PROGRAM: &str = r#"
#include "boolean_flow.h"
#include <math.h>
#include <stdio.h>

int main(void) {
    double lengths[] = {5.0, 7.0, 9.0};
    BfSample *s = NULL;
    if (bf_sample_new(lengths, 3, 5.0, 1e-6, &s) != BF_STATUS_OK) return 1;
    double ab = 0.0;
    if (bf_a_hat_bayes(s, 0.2, 5.0, 0, &ab) != BF_STATUS_OK) return 2;
    if (fabs(ab - 6.2) > 1e-9) return 3;
    BfEstimate *e = NULL;
    if (bf_m_estimate(s, &e) != BF_STATUS_OK) return 4;
    double lam = 0.0;
    if (bf_estimate_lambda(e, &lam) != BF_STATUS_OK || !(lam > 0.0)) return 5;
    double lo, hi;
    if (bf_estimate_ci_lrt(e, &lo, &hi) != BF_STATUS_UNAVAILABLE) return 6;
    if (bf_last_error_message()[0] == '\0') return 7;
    bf_estimate_free(e);
    bf_sample_free(s);
    printf("ok %s\n", bf_version());
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler ({cc}) available; skipping link test");
        return;
    }
    // test binaries live in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libboolean_flow_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let out = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header_path().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "compile failed:\n{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "C program exited with {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
