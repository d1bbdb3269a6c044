use std::ffi::{CStr, CString};
use std::ptr;

use bclearn_ffi::*;

fn last_error() -> String {
    let p = bc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn simulate(spec: &str, n: usize, seed: u64) -> *mut BcDataset {
    let spec = CString::new(spec).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { bc_dataset_simulate(spec.as_ptr(), n, seed, &mut d) },
        BcStatus::Ok
    );
    d
}

fn arcs(m: *const BcModel) -> Vec<(u32, u32)> {
    let mut n = 0;
    assert_eq!(unsafe { bc_model_num_arcs(m, &mut n) }, BcStatus::Ok);
    let (mut from, mut to) = (vec![0u32; n], vec![0u32; n]);
    assert_eq!(
        unsafe { bc_model_arcs(m, from.as_mut_ptr(), to.as_mut_ptr(), n) },
        BcStatus::Ok
    );
    from.into_iter().zip(to).collect()
}

// The five-case, three-variable example with six missing entries.
fn five_case() -> *mut BcDataset {
    #[rustfmt::skip]
    let cells: [i32; 15] = [
        0, 1, 1,
        1, -1, 0,
        -1, 0, 1,
        -1, -1, 0,
        0, -1, -1,
    ];
    let mut d = ptr::null_mut();
    let status =
        unsafe { bc_dataset_from_cells(3, [2u32, 2, 2].as_ptr(), 5, cells.as_ptr(), &mut d) };
    assert_eq!(status, BcStatus::Ok);
    d
}

#[test]
fn learn_recovers_chain_and_round_trips() {
    let d = simulate("M1", 1000, 2);
    let mut thinned = ptr::null_mut();
    assert_eq!(
        unsafe { bc_dataset_delete_entries(d, 0.2, 2, &mut thinned) },
        BcStatus::Ok
    );
    let (mut cases, mut vars, mut missing) = (0, 0, 0);
    assert_eq!(
        unsafe { bc_dataset_shape(thinned, &mut cases, &mut vars, &mut missing) },
        BcStatus::Ok
    );
    assert_eq!((cases, vars, missing), (1000, 3, 600));

    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { bc_learn(thinned, ptr::null(), 0, -1, 1.0, 1.0, BcPhi::Mar, &mut m) },
        BcStatus::Ok
    );
    assert_eq!(arcs(m), vec![(0, 1), (1, 2)]);

    let mut learned_score = f64::NAN;
    assert_eq!(
        unsafe { bc_score(m, thinned, 1.0, 1.0, BcPhi::Mar, &mut learned_score) },
        BcStatus::Ok
    );
    // same value the CLI reports for `simulate --seed 2 --missing 0.2` then `learn`
    assert!(
        (learned_score - -1400.127527).abs() < 1e-6,
        "{learned_score}"
    );

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { bc_model_to_json(m, &mut json) }, BcStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["arcs"].as_array().unwrap().len(), 2);

    let mut dot = ptr::null_mut();
    assert_eq!(unsafe { bc_model_to_dot(m, &mut dot) }, BcStatus::Ok);
    assert!(unsafe { CStr::from_ptr(dot) }
        .to_str()
        .unwrap()
        .starts_with("digraph"));

    unsafe {
        bc_string_free(json);
        bc_string_free(dot);
        bc_model_free(m);
        bc_dataset_free(thinned);
        bc_dataset_free(d);
    }
}

#[test]
fn family_counts_match_hand_tally() {
    let d = five_case();
    let parents = [0u32, 1];
    let mut cells = 0;
    let status = unsafe {
        bc_family_counts(
            d,
            2,
            parents.as_ptr(),
            2,
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            0,
            &mut cells,
        )
    };
    assert_eq!(status, BcStatus::Ok);
    assert_eq!(cells, 8);

    let (mut obs, mut comp) = (vec![0u64; 8], vec![0u64; 8]);
    let (mut pobs, mut pcomp) = (vec![0u64; 4], vec![0u64; 4]);
    let status = unsafe {
        bc_family_counts(
            d,
            2,
            parents.as_ptr(),
            2,
            obs.as_mut_ptr(),
            comp.as_mut_ptr(),
            pobs.as_mut_ptr(),
            pcomp.as_mut_ptr(),
            8,
            ptr::null_mut(),
        )
    };
    assert_eq!(status, BcStatus::Ok);
    assert_eq!(obs, vec![0, 0, 0, 1, 0, 0, 0, 0]);
    assert_eq!(comp, vec![2, 2, 2, 1, 2, 1, 2, 0]);
    assert_eq!(pobs, vec![0, 1, 0, 0]);
    assert_eq!(pcomp, vec![3, 2, 3, 2]);

    let status = unsafe {
        bc_family_counts(
            d,
            2,
            parents.as_ptr(),
            2,
            obs.as_mut_ptr(),
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            4,
            ptr::null_mut(),
        )
    };
    assert_eq!(status, BcStatus::InvalidArgument);
    unsafe { bc_dataset_free(d) };
}

#[test]
fn collider_score_matches_reference() {
    let d = five_case();
    let (from, to) = ([0u32, 1], [2u32, 2]);
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { bc_model_from_arcs(d, from.as_ptr(), to.as_ptr(), 2, &mut m) },
        BcStatus::Ok
    );
    let mut score = 0.0;
    assert_eq!(
        unsafe { bc_score(m, d, 1.0, 1.0, BcPhi::Mar, &mut score) },
        BcStatus::Ok
    );
    // matches `bclearn score` on the same data and arcs
    assert!((score - -12.402345974227275).abs() < 1e-12, "{score}");
    unsafe {
        bc_model_free(m);
        bc_dataset_free(d);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut d = ptr::null_mut();
    let path = CString::new("/no/such/file.csv").unwrap();
    assert_eq!(
        unsafe { bc_dataset_load_csv(path.as_ptr(), ptr::null(), &mut d) },
        BcStatus::Io
    );
    assert!(last_error().contains("/no/such/file.csv"));
    assert!(d.is_null());

    let spec = CString::new("M9").unwrap();
    assert_eq!(
        unsafe { bc_dataset_simulate(spec.as_ptr(), 10, 0, &mut d) },
        BcStatus::InvalidArgument
    );
    assert!(last_error().contains("M9"));

    assert_eq!(
        unsafe { bc_dataset_simulate(ptr::null(), 10, 0, &mut d) },
        BcStatus::NullPointer
    );
    let mut n = 0;
    assert_eq!(
        unsafe { bc_model_num_arcs(ptr::null(), &mut n) },
        BcStatus::NullPointer
    );

    let bad = [0i32, 5];
    let status = unsafe { bc_dataset_from_cells(2, [2u32, 2].as_ptr(), 1, bad.as_ptr(), &mut d) };
    assert_eq!(status, BcStatus::InvalidArgument);

    let real = simulate("M1", 50, 1);
    let mut m = ptr::null_mut();
    let order = [0u32, 1, 7];
    assert_eq!(
        unsafe { bc_learn(real, order.as_ptr(), 3, -1, 1.0, 1.0, BcPhi::Mar, &mut m) },
        BcStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { bc_learn(real, ptr::null(), 0, -1, 0.0, 1.0, BcPhi::Mar, &mut m) },
        BcStatus::InvalidArgument
    );
    assert!(last_error().contains("alpha"));

    assert_eq!(
        unsafe { bc_learn(real, ptr::null(), 0, 0, 1.0, 1.0, BcPhi::Uniform, &mut m) },
        BcStatus::Ok
    );
    assert!(arcs(m).is_empty());
    assert!(bc_last_error_message().is_null());
    unsafe {
        bc_model_free(m);
        bc_dataset_free(real);
        bc_dataset_free(ptr::null_mut());
        bc_model_free(ptr::null_mut());
        bc_string_free(ptr::null_mut());
    }
}

#[test]
fn header_is_current() {
    let header = include_str!("../include/bclearn.h");
    for name in [
        "bc_last_error_message",
        "bc_dataset_load_csv",
        "bc_dataset_from_cells",
        "bc_dataset_simulate",
        "bc_dataset_delete_entries",
        "bc_dataset_shape",
        "bc_dataset_free",
        "bc_family_counts",
        "bc_learn",
        "bc_model_from_arcs",
        "bc_score",
        "bc_model_num_arcs",
        "bc_model_arcs",
        "bc_model_to_json",
        "bc_model_to_dot",
        "bc_model_free",
        "bc_string_free",
        "BC_STATUS_PANIC",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compiles `tests/c/smoke.c` against the header and static library. Skipped
/// when no C compiler is on the path.
#[test]
fn c_program_links_and_runs() {
    use std::path::PathBuf;
    use std::process::Command;

    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // tests run from <target>/<profile>/deps
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libbclearn_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("bclearn_smoke");
    let status = Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "arcs=2 0->1 1->2 score=-1400.127527\n"
    );
}
