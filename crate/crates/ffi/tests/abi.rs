use std::ffi::{CStr, CString};
use std::ptr;

use causal_nie_ffi::*;

fn fixture(name: &str) -> CString {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name);
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

fn last_error() -> String {
    let p = cnie_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn load(name: &str) -> *mut CnieModel {
    let mut model = ptr::null_mut();
    let status = unsafe { cnie_model_from_json(fixture(name).as_ptr(), &mut model) };
    assert_eq!(status, CnieStatus::Ok);
    assert!(!model.is_null());
    model
}

#[test]
fn three_node_nie() {
    let model = load("three_node.json");
    assert_eq!(unsafe { cnie_model_node_count(model) }, 3);
    let (t, m) = (CString::new("T").unwrap(), CString::new("M").unwrap());
    let mut est = CnieEstimate::default();
    let status = unsafe { cnie_estimate_nie(model, t.as_ptr(), m.as_ptr(), 1_000, 3, &mut est) };
    assert_eq!(status, CnieStatus::Ok);
    assert!((est.point - 6.0).abs() < 1e-9);
    assert_eq!(est.n_draws, 1_000);
    assert!(cnie_last_error_message().is_null());
    unsafe { cnie_model_free(model) };
}

#[test]
fn exact_and_errors() {
    let model = load("xor_or.json");
    let (t, m, bad) = (
        CString::new("T").unwrap(),
        CString::new("M").unwrap(),
        CString::new("Q").unwrap(),
    );
    let mut v = 0.0;
    assert_eq!(
        unsafe { cnie_exact_nie(model, t.as_ptr(), m.as_ptr(), &mut v) },
        CnieStatus::Ok
    );
    assert!((v - 0.25).abs() < 1e-15);

    assert_eq!(
        unsafe { cnie_exact_nie(model, t.as_ptr(), bad.as_ptr(), &mut v) },
        CnieStatus::InvalidGraph
    );
    assert!(last_error().contains("UnknownNode"));
    assert_eq!(
        unsafe { cnie_exact_nie(model, ptr::null(), m.as_ptr(), &mut v) },
        CnieStatus::NullArgument
    );
    assert_eq!(
        unsafe { cnie_exact_nie(ptr::null(), t.as_ptr(), m.as_ptr(), &mut v) },
        CnieStatus::NullArgument
    );
    unsafe { cnie_model_free(model) };

    let model = load("three_node.json");
    assert_eq!(
        unsafe { cnie_exact_nie(model, t.as_ptr(), m.as_ptr(), &mut v) },
        CnieStatus::Unsupported
    );
    unsafe { cnie_model_free(model) };
}

#[test]
fn bad_json_and_graphs() {
    let mut model = ptr::null_mut();
    let text = CString::new("{\"nodes\": 3}").unwrap();
    assert_eq!(
        unsafe { cnie_model_from_json(text.as_ptr(), &mut model) },
        CnieStatus::Parse
    );
    assert!(model.is_null());
    assert!(last_error().starts_with("Parse"));

    let cyclic = fixture("cyclic.json");
    assert_eq!(
        unsafe { cnie_model_from_json(cyclic.as_ptr(), &mut model) },
        CnieStatus::InvalidGraph
    );
    assert_eq!(
        unsafe { cnie_model_from_json(cyclic.as_ptr(), ptr::null_mut()) },
        CnieStatus::NullArgument
    );
}

#[test]
fn count_dags_string() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { cnie_count_dags(2, 3, &mut out) }, CnieStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(out) }.to_str().unwrap(), "16384");
    unsafe { cnie_string_free(out) };
    assert_eq!(unsafe { cnie_count_dags(0, 3, &mut out) }, CnieStatus::InvalidConfig);
    assert!(out.is_null());
}

#[test]
fn analyze_matches_core_report() {
    let model = load("logistics_model.json");
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { cnie_analyze(model, 2_000, 11, CnieFormat::Tsv, &mut out) },
        CnieStatus::Ok
    );
    let tsv = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
    unsafe { cnie_string_free(out) };
    assert!(tsv.starts_with("# seed\t11\n# n_draws\t2000\n"));
    assert_eq!(tsv.lines().filter(|l| l.starts_with("DriverExp\t")).count(), 5);

    assert_eq!(
        unsafe { cnie_analyze(model, 2_000, 11, CnieFormat::Json, &mut out) },
        CnieStatus::Ok
    );
    let json = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
    unsafe { cnie_string_free(out) };
    assert!(json.contains("\"model_sha256\""));
    unsafe { cnie_model_free(model) };
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(cnie_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
