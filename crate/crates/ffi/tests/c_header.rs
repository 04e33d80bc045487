//! Compiles a small C program against the generated header and the static
//! library. Skipped (with a note) when no C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "equipart.h"

int main(void) {
    EqpFunction *f = NULL;
    if (eqp_function_from_expression("b^2 - a^2", &f) != EQP_STATUS_OK) return 10;
    EqpSolveConfig cfg = eqp_solve_config_default();
    cfg.grid_n = 64;
    cfg.grid_m = 64;
    EqpWitness *w = NULL;
    if (eqp_solve(f, 2, &cfg, &w) != EQP_STATUS_OK) return 11;
    double cut = 0.0;
    if (eqp_witness_cuts(w, &cut, 1) != EQP_STATUS_OK) return 12;
    if (fabs(cut - sqrt(0.5)) > 1e-9) return 13;
    EqpFunction *bad = NULL;
    if (eqp_function_from_expression("b - * a", &bad) != EQP_STATUS_PARSE) return 14;
    if (eqp_last_error() == NULL) return 15;
    printf("%.12f\n", cut);
    eqp_witness_free(w);
    eqp_function_free(f);
    return 0;
}
"#;

fn have(cmd: &str) -> bool {
    Command::new(cmd).arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn c_program_links_and_runs() {
    if !have("cc") {
        eprintln!("note: no C compiler found, skipping");
        return;
    }
    // target/<profile>/deps/<test-binary> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libequipart_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    let cut: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((cut - 0.5f64.sqrt()).abs() < 1e-9);
}
