use std::path::PathBuf;
use std::process::Command;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(manifest().join("include/g2flow.h")).unwrap();
    for name in [
        "typedef struct G2Metric G2Metric",
        "typedef struct G2Instanton G2Instanton",
        "typedef struct G2ScanMap G2ScanMap",
        "G2_STATUS_OK = 0",
        "G2_STATUS_NOT_CLOSED",
        "G2_VERDICT_COMPLETE_BOUNDARY",
        "g2flow_metric_new(",
        "g2flow_metric_free(",
        "g2flow_instanton_verdict(",
        "g2flow_scan_cell(",
        "g2flow_boundary(",
        "g2flow_end_shoot(",
        "g2flow_asd_eval(",
        "g2flow_last_error(",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

/// Compiles a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    // Test binaries live next to the freshly built archive in `deps/`.
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().join("libg2flow_ffi.a");
    assert!(
        lib.exists(),
        "static library not found at {}",
        lib.display()
    );
    let out = tempfile_dir().join("smoke");
    let status = Command::new("cc")
        .arg(manifest().join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("cc available");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.starts_with("ell 1.46286953"), "{text}");
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("g2flow-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
