use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use garde_ffi::*;

fn square_truth() -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let nodes = vec![[0.7, 0.6], [5.1, 1.0], [4.6, 4.3], [1.2, 3.9]];
    let sources = (0..12)
        .map(|i| {
            let t = i as f64;
            [1.0 + (t * 0.77).sin().abs() * 4.0, 1.0 + (t * 1.31).cos().abs() * 3.0]
        })
        .collect();
    (nodes, sources)
}

fn dense(nodes: &[[f64; 2]], sources: &[[f64; 2]]) -> Vec<f64> {
    let mut d = Vec::new();
    for n in nodes {
        for s in sources {
            d.push(((n[0] - s[0]).powi(2) + (n[1] - s[1]).powi(2)).sqrt());
        }
    }
    d
}

fn last_error() -> String {
    let p = garde_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn calibrates_exact_observations() {
    let (nodes, sources) = square_truth();
    let d = dense(&nodes, &sources);
    unsafe {
        let mut obs = ptr::null_mut();
        assert_eq!(garde_observations_new(4, 12, d.as_ptr(), ptr::null(), &mut obs), GardeStatus::Ok);
        assert!(garde_last_error_message().is_null());

        let cfg = garde_config_default();
        assert_eq!(cfg.num_iterations, 30);
        assert_eq!(cfg.num_annealing, 30);
        let mut res = ptr::null_mut();
        assert_eq!(garde_calibrate(obs, &cfg, &mut res), GardeStatus::Ok);
        assert_eq!(garde_result_node_count(res), 4);
        assert_eq!(garde_result_source_count(res), 12);
        assert!(garde_result_fit_score(res) < 1e-8);

        let mut est = vec![0.0; 8];
        assert_eq!(garde_result_nodes(res, est.as_mut_ptr(), 4), GardeStatus::Ok);
        let truth: Vec<f64> = nodes.iter().flatten().copied().collect();
        let mut err = f64::NAN;
        assert_eq!(
            garde_calibration_error(est.as_ptr(), truth.as_ptr(), 4, true, &mut err),
            GardeStatus::Ok
        );
        assert!(err < 1e-6, "{err}");

        let mut src = vec![0.0; 2 * 12];
        assert_eq!(garde_result_sources(res, src.as_mut_ptr(), 12), GardeStatus::Ok);
        assert_eq!(
            garde_result_sources(res, src.as_mut_ptr(), 11),
            GardeStatus::InvalidArgument
        );

        let mut len = 0usize;
        assert_eq!(
            garde_result_selected_sources(res, ptr::null_mut(), 0, &mut len),
            GardeStatus::Ok
        );
        assert_eq!(len, 10);
        let mut sel = vec![usize::MAX; len];
        assert_eq!(
            garde_result_selected_sources(res, sel.as_mut_ptr(), len, &mut len),
            GardeStatus::Ok
        );
        assert!(sel.windows(2).all(|w| w[0] < w[1]) && sel.iter().all(|&k| k < 12));

        garde_result_free(res);
        garde_observations_free(obs);
    }
}

#[test]
fn null_config_means_defaults() {
    let (nodes, sources) = square_truth();
    let d = dense(&nodes, &sources);
    unsafe {
        let mut obs = ptr::null_mut();
        assert_eq!(garde_observations_new(4, 12, d.as_ptr(), ptr::null(), &mut obs), GardeStatus::Ok);
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        let cfg = garde_config_default();
        assert_eq!(garde_calibrate(obs, ptr::null(), &mut a), GardeStatus::Ok);
        assert_eq!(garde_calibrate(obs, &cfg, &mut b), GardeStatus::Ok);
        assert_eq!(garde_result_fit_score(a).to_bits(), garde_result_fit_score(b).to_bits());
        garde_result_free(a);
        garde_result_free(b);
        garde_observations_free(obs);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut obs = ptr::null_mut();
        assert_eq!(
            garde_observations_new(2, 2, ptr::null(), ptr::null(), &mut obs),
            GardeStatus::NullPointer
        );

        let d = [1.0, -2.0, 1.0, 1.0];
        assert_eq!(garde_observations_new(2, 2, d.as_ptr(), ptr::null(), &mut obs), GardeStatus::Data);
        assert!(last_error().contains("node 0, source 1"), "{}", last_error());

        // Masked entries may hold anything.
        let mask = [1u8, 0, 1, 1];
        assert_eq!(garde_observations_new(2, 2, d.as_ptr(), mask.as_ptr(), &mut obs), GardeStatus::Ok);
        let mut res = ptr::null_mut();
        assert_eq!(garde_calibrate(obs, ptr::null(), &mut res), GardeStatus::Data);
        assert!(res.is_null());
        assert!(last_error().contains("valid observations"), "{}", last_error());

        let mut cfg = garde_config_default();
        cfg.alpha = 1.5;
        assert_eq!(garde_calibrate(obs, &cfg, &mut res), GardeStatus::InvalidArgument);
        assert!(last_error().contains("alpha"));
        garde_observations_free(obs);

        garde_observations_free(ptr::null_mut());
        garde_result_free(ptr::null_mut());
        assert!(garde_result_fit_score(ptr::null()).is_nan());
        assert_eq!(garde_result_node_count(ptr::null()), 0);
    }
}

#[test]
fn crlb_entry_points() {
    let nodes = [1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0];
    let mut b = f64::NAN;
    unsafe {
        assert_eq!(garde_source_rmse_bound(nodes.as_ptr(), 4, 0.0, 0.0, 0.1, &mut b), GardeStatus::Ok);
        assert!((b - 0.1).abs() < 1e-12);
        assert_eq!(garde_node_rmse_bound(nodes.as_ptr(), 4, 0.0, 0.0, 0.1, &mut b), GardeStatus::Ok);
        assert!((b - 0.1).abs() < 1e-12);
        assert_eq!(
            garde_source_rmse_bound(nodes.as_ptr(), 4, 1.0, 1.0, 0.1, &mut b),
            GardeStatus::Numerical
        );
        assert!(last_error().contains("coincides"));
        assert_eq!(
            garde_source_rmse_bound(nodes.as_ptr(), 4, 0.0, 0.0, 0.0, &mut b),
            GardeStatus::InvalidArgument
        );
    }
}

#[test]
fn calibration_error_reflection_flag() {
    let truth = [0.0, 0.0, 3.0, 0.0, 0.0, 2.0, 1.0, 1.5];
    let mirrored: Vec<f64> = truth.chunks(2).flat_map(|c| [c[0], -c[1]]).collect();
    let (mut with, mut without) = (f64::NAN, f64::NAN);
    unsafe {
        assert_eq!(
            garde_calibration_error(mirrored.as_ptr(), truth.as_ptr(), 4, true, &mut with),
            GardeStatus::Ok
        );
        assert_eq!(
            garde_calibration_error(mirrored.as_ptr(), truth.as_ptr(), 4, false, &mut without),
            GardeStatus::Ok
        );
    }
    assert!(with < 1e-12);
    assert!(without > 0.1);
}

#[test]
fn status_strings() {
    for (s, text) in [
        (GardeStatus::Ok, "ok"),
        (GardeStatus::Numerical, "numerical failure"),
        (GardeStatus::Internal, "internal error"),
    ] {
        assert_eq!(unsafe { CStr::from_ptr(garde_status_string(s)) }.to_str().unwrap(), text);
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(crate_dir().join("include/garde.h")).unwrap();
    for name in [
        "typedef struct GardeObservations GardeObservations;",
        "typedef struct GardeResult GardeResult;",
        "GARDE_STATUS_NUMERICAL = 4",
        "garde_observations_new(",
        "garde_calibrate(",
        "garde_result_selected_sources(",
        "garde_calibration_error(",
        "garde_source_rmse_bound(",
        "garde_node_rmse_bound(",
        "garde_last_error_message(void)",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

/// Static library built alongside this test binary, in `deps/` or the
/// profile directory above it.
fn static_library() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    [deps, deps.parent().unwrap()]
        .iter()
        .map(|d: &&Path| d.join("libgarde_ffi.a"))
        .find(|p| p.exists())
        .expect("libgarde_ffi.a built next to the test binary")
}

#[test]
fn c_program_links_against_static_library() {
    let lib = static_library();
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <math.h>
#include "garde.h"

int main(void) {
    double nodes[8] = {1, 1, 1, -1, -1, 1, -1, -1};
    double bound = 0;
    if (garde_source_rmse_bound(nodes, 4, 0, 0, 0.1, &bound) != GARDE_STATUS_OK) return 1;
    if (fabs(bound - 0.1) > 1e-12) return 2;

    double d[4 * 6];
    double src[12] = {0.3, 0.2, -0.4, 0.5, 0.1, -0.6, 2.0, 0.3, -1.5, -1.8, 0.9, 1.7};
    for (int n = 0; n < 4; n++)
        for (int k = 0; k < 6; k++)
            d[n * 6 + k] = hypot(nodes[2 * n] - src[2 * k], nodes[2 * n + 1] - src[2 * k + 1]);
    GardeObservations *obs = NULL;
    if (garde_observations_new(4, 6, d, NULL, &obs) != GARDE_STATUS_OK) return 3;
    GardeCalibrationConfig cfg = garde_config_default();
    GardeResult *res = NULL;
    if (garde_calibrate(obs, &cfg, &res) != GARDE_STATUS_OK) return 4;
    double est[8];
    if (garde_result_nodes(res, est, 4) != GARDE_STATUS_OK) return 5;
    double err = 1;
    if (garde_calibration_error(est, nodes, 4, true, &err) != GARDE_STATUS_OK) return 6;
    printf("%.3e\n", err);
    garde_result_free(res);
    garde_observations_free(obs);

    if (garde_observations_new(4, 6, NULL, NULL, &obs) != GARDE_STATUS_NULL_POINTER) return 7;
    if (garde_last_error_message() == NULL) return 8;
    return err < 1e-6 ? 0 : 9;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("prog");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stdout));
}
