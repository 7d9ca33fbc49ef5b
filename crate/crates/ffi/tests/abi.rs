use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use structdm_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sdm_last_error()) }.to_str().unwrap().to_string()
}

#[test]
fn ontology_and_policy_handles() {
    unsafe {
        let mut ont = ptr::null_mut();
        assert_eq!(sdm_ontology_bundled(&mut ont), SdmStatus::Ok);
        assert_eq!(sdm_ontology_domain_count(ont), 7);
        let mut two = ptr::null_mut();
        assert_eq!(sdm_ontology_restrict(ont, c("restaurant, hotel").as_ptr(), &mut two), SdmStatus::Ok);
        assert_eq!(sdm_ontology_domain_count(two), 2);

        let mut a = ptr::null_mut();
        let mut b = ptr::null_mut();
        assert_eq!(sdm_policy_new(ont, c("uhgnn").as_ptr(), 1, &mut a), SdmStatus::Ok);
        assert_eq!(sdm_policy_new(two, c("uhgnn").as_ptr(), 1, &mut b), SdmStatus::Ok);
        assert_eq!(sdm_policy_param_count(a), sdm_policy_param_count(b));
        assert!(sdm_policy_param_count(a) > 0);

        let dir = tempfile::tempdir().unwrap();
        let path = c(dir.path().join("p.ckpt").to_str().unwrap());
        assert_eq!(sdm_policy_save(b, path.as_ptr()), SdmStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(sdm_policy_load(path.as_ptr(), ptr::null(), &mut loaded), SdmStatus::Ok);
        let mut m1 = SdmMetrics::default();
        let mut m2 = SdmMetrics::default();
        assert_eq!(sdm_evaluate_policy(b, 20, 4, 2, &mut m1), SdmStatus::Ok);
        assert_eq!(sdm_evaluate_policy(loaded, 20, 4, 2, &mut m2), SdmStatus::Ok);
        assert_eq!(m1, m2);
        assert_eq!(m1.dialogues, 20);

        sdm_policy_free(loaded);
        sdm_policy_free(a);
        sdm_policy_free(b);
        sdm_ontology_free(two);
        sdm_ontology_free(ont);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut ont = ptr::null_mut();
        assert_eq!(sdm_ontology_bundled(ptr::null_mut()), SdmStatus::NullArgument);
        assert_eq!(sdm_ontology_load(c("/nonexistent.json").as_ptr(), &mut ont), SdmStatus::Io);
        assert!(last_error().contains("nonexistent"));
        assert!(ont.is_null());

        sdm_ontology_bundled(&mut ont);
        assert_eq!(last_error(), "");
        let mut out = ptr::null_mut();
        assert_eq!(sdm_ontology_restrict(ont, c("atlantis").as_ptr(), &mut out), SdmStatus::InvalidArgument);
        assert!(last_error().contains("atlantis"));
        let mut p = ptr::null_mut();
        assert_eq!(sdm_policy_new(ont, c("lstm").as_ptr(), 0, &mut p), SdmStatus::InvalidArgument);
        let bad = [0xffu8, 0];
        assert_eq!(sdm_policy_new(ont, bad.as_ptr().cast(), 0, &mut p), SdmStatus::InvalidUtf8);
        let mut m = SdmMetrics::default();
        assert_eq!(sdm_evaluate_oracle(ont, 0, 0, 3, &mut m), SdmStatus::InvalidArgument);
        assert_eq!(sdm_evaluate_oracle(ont, 5, 0, 0, &mut m), SdmStatus::InvalidArgument);
        assert_eq!(sdm_evaluate_oracle(ptr::null(), 5, 0, 3, &mut m), SdmStatus::NullArgument);

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.ckpt");
        std::fs::write(&junk, b"not a checkpoint").unwrap();
        let status = sdm_policy_load(c(junk.to_str().unwrap()).as_ptr(), ont, &mut p);
        assert!(matches!(status, SdmStatus::Checkpoint | SdmStatus::Parse), "{status:?}");

        // null handles are tolerated by accessors and destructors
        assert_eq!(sdm_ontology_domain_count(ptr::null()), 0);
        sdm_ontology_free(ptr::null_mut());
        sdm_policy_free(ptr::null_mut());
        sdm_session_free(ptr::null_mut());
        sdm_string_free(ptr::null_mut());
        sdm_ontology_free(ont);
    }
}

#[test]
fn oracle_metrics_and_session() {
    unsafe {
        let mut ont = ptr::null_mut();
        sdm_ontology_bundled(&mut ont);
        let mut m = SdmMetrics::default();
        assert_eq!(sdm_evaluate_oracle(ont, 200, 0, 3, &mut m), SdmStatus::Ok);
        assert!(m.success >= 0.95 && m.complete >= 0.95, "{m:?}");

        let mut s = ptr::null_mut();
        assert_eq!(sdm_session_new_oracle(ont, &mut s), SdmStatus::Ok);
        let mut reply = ptr::null_mut();
        assert_eq!(sdm_session_send(s, c("inform[restaurant.food=italian]").as_ptr(), &mut reply), SdmStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(reply).to_str().unwrap()).unwrap();
        sdm_string_free(reply);
        assert!(v["system"].as_array().is_some_and(|a| !a.is_empty()));
        assert!(v["verdict"].is_null());
        assert_eq!(sdm_session_send(s, c("inform[restaurant.food=").as_ptr(), &mut reply), SdmStatus::Parse);
        assert_eq!(sdm_session_send(s, c("inform[restaurant.food=sushi]").as_ptr(), &mut reply), SdmStatus::InvalidArgument);
        assert_eq!(sdm_session_send(s, c("bye").as_ptr(), &mut reply), SdmStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(reply).to_str().unwrap()).unwrap();
        sdm_string_free(reply);
        assert!(v["verdict"]["success"].is_boolean());
        sdm_session_free(s);
        sdm_ontology_free(ont);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(sdm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/structdm.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["sdm_last_error", "sdm_session_send", "sdm_evaluate_policy", "SDM_STATUS_CHECKPOINT"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header])
            .status()
            .unwrap_or_else(|e| panic!("{compiler}: {e}"));
        assert!(status.success(), "{compiler} rejected the header");
    }
}
