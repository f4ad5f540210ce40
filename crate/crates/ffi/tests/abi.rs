use std::ffi::{CStr, CString};
use std::ptr;

use ssm_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ssm_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn equilibrium_stage_through_the_abi() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(ssm_session_example1(&mut s), SsmStatus::Ok);
        let mut d = ptr::null_mut();
        assert_eq!(ssm_session_run(s, SsmStage::Equilibrium as u32, &mut d), SsmStatus::Ok);
        let (mut rows, mut outputs) = (0usize, 0usize);
        assert_eq!(ssm_dataset_shape(d, &mut rows, &mut outputs), SsmStatus::Ok);
        assert_eq!(outputs, 2);
        let mut events = [0; 8];
        let mut amps = vec![0.0; outputs];
        for i in 0..rows {
            let mut r = SsmRow::default();
            assert_eq!(ssm_dataset_row(d, i, &mut r, amps.as_mut_ptr()), SsmStatus::Ok);
            assert!(r.ts.is_nan() && r.om1s.is_nan());
            assert!(amps.iter().all(|a| a.is_finite() && *a >= 0.0));
            events[r.event as usize] += 1;
        }
        assert_eq!((events[1], events[2]), (4, 2));
        let mut r = SsmRow::default();
        assert_eq!(ssm_dataset_row(d, rows, &mut r, ptr::null_mut()), SsmStatus::OutOfRange);
        assert!(last_error().contains("row"));

        let mut json = ptr::null_mut();
        assert_eq!(ssm_dataset_json(d, &mut json), SsmStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        ssm_string_free(json);
        assert!(text.contains("\"order\": 3"));

        let dir = tempfile::tempdir().unwrap();
        let p = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(ssm_dataset_export(d, p.as_ptr(), SsmFormat::Csv as u32), SsmStatus::Ok);
        assert!(dir.path().join("frc_equilibrium.csv").exists());

        ssm_dataset_free(d);
        ssm_session_free(s);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let mut s = ptr::null_mut();
        let bad = CString::new(r#"{"version": 2}"#).unwrap();
        assert_eq!(ssm_session_new(bad.as_ptr(), &mut s), SsmStatus::Config);
        assert!(s.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(ssm_session_new(ptr::null(), &mut s), SsmStatus::NullPointer);
        let mut rows = 0;
        assert_eq!(ssm_dataset_shape(ptr::null(), &mut rows, &mut rows), SsmStatus::NullPointer);

        // No Hopf point without forcing, so no cycle stage.
        let cfg = CString::new(
            r#"{"version": 1, "system": {"builder": {"name": "example1"}}, "modes": [0, 1],
                "omega_range": [0.9, 1.1], "eps": 0.0}"#,
        )
        .unwrap();
        assert_eq!(ssm_session_new(cfg.as_ptr(), &mut s), SsmStatus::Ok);
        assert!(last_error().is_empty());
        let mut d = ptr::null_mut();
        assert_eq!(ssm_session_run(s, SsmStage::Po as u32, &mut d), SsmStatus::Missing);
        assert!(last_error().contains("HB"));
        assert_eq!(ssm_session_run(s, 9, &mut d), SsmStatus::OutOfRange);
        ssm_session_free(s);
        ssm_session_free(ptr::null_mut());
        ssm_dataset_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ssm.h")).unwrap();
    for name in ["ssm_session_new", "ssm_session_run", "ssm_dataset_row", "ssm_last_error", "SSM_STATUS_MISSING", "typedef struct SsmSession SsmSession"] {
        assert!(h.contains(name), "{name} missing from the header");
    }
    let v = unsafe { CStr::from_ptr(ssm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"ssm.h\"\nint main(void) {\n  SsmSession *s = 0;\n  SsmRow r;\n  enum SsmStatus st = ssm_session_example1(&s);\n  (void)r; (void)st;\n  return SSM_STAGE_PO;\n}\n",
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
