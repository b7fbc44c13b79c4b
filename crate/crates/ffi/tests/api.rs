use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use see_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(see_last_error()).to_string_lossy().into_owned() }
}

fn toy3(discount: f64) -> *mut SeeModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { see_model_toy3(discount, &mut m) }, SeeStatus::Ok);
    m
}

#[test]
fn enumerate_and_read_back_values() {
    let m = toy3(0.1);
    unsafe {
        assert_eq!(see_model_n_states(m), 3);
        assert!(!see_model_is_viable(m, 0));
        assert!(see_model_is_viable(m, 1) && see_model_is_viable(m, 2));
        let mut set = ptr::null_mut();
        assert_eq!(see_enumerate(m, &mut set), SeeStatus::Ok);
        assert_eq!(see_equilibria_len(set), 1);
        let (mut wx, mut we) = ([0.0; 3], [0.0; 3]);
        assert_eq!(see_equilibria_values(set, 0, wx.as_mut_ptr(), we.as_mut_ptr(), 3), SeeStatus::Ok);
        assert_eq!(wx, [0.0, 2.0, 2.2]);
        assert_eq!(we, [0.0, 0.0, 1.0]);
        let mut gain = f64::NAN;
        assert_eq!(see_equilibria_max_gain(set, 0, &mut gain), SeeStatus::Ok);
        assert!(gain <= 1e-8);
        let mut a = 9;
        assert_eq!(see_equilibria_leader_action(set, 0, 2, &mut a), SeeStatus::Ok);
        assert_eq!(a, 1);
        assert_eq!(see_equilibria_leader_action(set, 0, 3, &mut a), SeeStatus::OutOfRange);
        assert_eq!(see_equilibria_values(set, 0, wx.as_mut_ptr(), we.as_mut_ptr(), 2), SeeStatus::InvalidArgument);
        assert!(last_error().contains("3 states"));
        see_equilibria_free(set);
        see_model_free(m);
    }
}

#[test]
fn refine_reports_the_chain() {
    let cfg = CString::new(
        "[model]\nkind = \"toy3\"\ndiscount = 0.5\n[refine]\nfind_threshold = true\n",
    )
    .unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(see_model_from_toml(cfg.as_ptr(), &mut m), SeeStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(see_refine(m, &mut r), SeeStatus::Ok);
        let mut c = SeeCounts::default();
        assert_eq!(see_report_counts(r, &mut c), SeeStatus::Ok);
        assert!(c.renegotiation_proof <= c.viable && c.viable <= c.equilibria);
        assert!(see_report_penalty(r) > 0.0);
        let json = see_report_to_json(r);
        assert!(!json.is_null());
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        see_string_free(json);
        assert!(text.contains("\"renegotiation_proof\""));
        if c.selected {
            let (mut wx, mut we) = ([0.0; 3], [0.0; 3]);
            assert_eq!(see_report_selected_values(r, wx.as_mut_ptr(), we.as_mut_ptr(), 3), SeeStatus::Ok);
        }
        see_report_free(r);
        see_model_free(m);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut m = ptr::null_mut();
        let missing = CString::new("[model]\nkind = \"toy3\"\n").unwrap();
        assert_eq!(see_model_from_toml(missing.as_ptr(), &mut m), SeeStatus::Config);
        assert!(m.is_null());
        assert!(last_error().contains("model.discount"));

        assert_eq!(see_model_toy3(1.5, &mut m), SeeStatus::Config);
        assert!(last_error().contains("[0, 1)"));
        assert_eq!(see_model_toy3(f64::NAN, &mut m), SeeStatus::InvalidArgument);

        let tiny = CString::new("[run]\nbudget = 2\n[model]\nkind = \"toy3\"\ndiscount = 0.5\n").unwrap();
        assert_eq!(see_model_from_toml(tiny.as_ptr(), &mut m), SeeStatus::Ok);
        let mut set = ptr::null_mut();
        assert_eq!(see_enumerate(m, &mut set), SeeStatus::BudgetExceeded);
        assert!(set.is_null());
        see_model_free(m);

        let bad = [0xffu8, 0];
        assert_eq!(see_model_from_toml(bad.as_ptr().cast(), &mut m), SeeStatus::InvalidUtf8);
    }
}

#[test]
fn null_handles_are_rejected() {
    unsafe {
        assert_eq!(see_model_toy3(0.5, ptr::null_mut()), SeeStatus::NullPointer);
        let mut set = ptr::null_mut();
        assert_eq!(see_enumerate(ptr::null(), &mut set), SeeStatus::NullPointer);
        let mut r = ptr::null_mut();
        assert_eq!(see_refine(ptr::null(), &mut r), SeeStatus::NullPointer);
        assert_eq!(see_model_n_states(ptr::null()), 0);
        assert_eq!(see_equilibria_len(ptr::null()), 0);
        assert!(see_report_to_json(ptr::null()).is_null());
        assert!(see_report_penalty(ptr::null()).is_nan());
        see_model_free(ptr::null_mut());
        see_equilibria_free(ptr::null_mut());
        see_report_free(ptr::null_mut());
        see_string_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(see_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/see.h")).unwrap();
    for f in ["see_model_from_toml", "see_enumerate", "see_refine", "see_report_to_json", "see_last_error", "SEE_STATUS_OK"] {
        assert!(h.contains(f), "{f}");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libsee_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = tempfile_path("see_smoke");
    let cc = Command::new("cc")
        .arg(dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .output()
        .expect("a C compiler is installed");
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}

fn tempfile_path(stem: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("{stem}-{}", std::process::id()))
}
