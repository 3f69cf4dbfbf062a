use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use rbdsde_ffi::*;

fn last_error() -> String {
    let p = rbdsde_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn problem(name: &str) -> *mut RbdsdeProblem {
    let name = CString::new(name).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rbdsde_problem_builtin(name.as_ptr(), &mut out) }, RbdsdeStatus::Ok);
    out
}

fn tree(steps: usize) -> *mut RbdsdeNoise {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rbdsde_noise_tree(1.0, steps, &mut out) }, RbdsdeStatus::Ok);
    out
}

#[test]
fn snell_solve_through_the_abi() {
    unsafe {
        let p = problem("snell-only");
        let n = tree(2);
        let mut s = ptr::null_mut();
        assert_eq!(rbdsde_solve(p, n, RBDSDE_ENGINE_TREE, 0, &mut s), RbdsdeStatus::Ok);
        let (mut steps, mut paths, mut dim) = (0, 0, 0);
        assert_eq!(rbdsde_solution_shape(s, &mut steps, &mut paths, &mut dim), RbdsdeStatus::Ok);
        assert_eq!((steps, paths, dim), (2, 16, 1));
        let (mut y, mut k) = (0.0, 0.0);
        assert_eq!(rbdsde_solution_y(s, 0, 3, &mut y), RbdsdeStatus::Ok);
        assert_eq!(rbdsde_solution_k(s, 2, 3, &mut k), RbdsdeStatus::Ok);
        assert_eq!((y, k), (1.0, 1.0));
        let mut z = [f64::NAN; 1];
        assert_eq!(rbdsde_solution_z(s, 0, 0, z.as_mut_ptr(), 1), RbdsdeStatus::Ok);
        assert_eq!(z[0], 0.0);
        assert_eq!(rbdsde_solution_y(s, 3, 0, &mut y), RbdsdeStatus::OutOfRange);
        rbdsde_solution_free(s);
        rbdsde_noise_free(n);
        rbdsde_problem_free(p);
    }
}

#[test]
fn minimal_selection_through_the_abi() {
    unsafe {
        let p = problem("step-generator");
        let n = tree(4);
        let mut s = ptr::null_mut();
        assert_eq!(rbdsde_solve(p, n, RBDSDE_ENGINE_TREE, 0, &mut s), RbdsdeStatus::NotLipschitz);
        assert!(last_error().contains("Lipschitz"));
        let mut converged = false;
        let status = rbdsde_iterate(p, n, RBDSDE_ENGINE_TREE, 0, RBDSDE_SELECT_MINIMAL, 0.0, 0, &mut s, &mut converged);
        assert_eq!(status, RbdsdeStatus::Ok);
        assert!(converged);
        let mut y0 = f64::NAN;
        assert_eq!(rbdsde_solution_mean_y(s, 0, &mut y0), RbdsdeStatus::Ok);
        assert!(y0.abs() <= 1e-10);
        rbdsde_solution_free(s);
        rbdsde_noise_free(n);
        rbdsde_problem_free(p);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let bogus = CString::new("no-such-problem").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(rbdsde_problem_builtin(bogus.as_ptr(), &mut p), RbdsdeStatus::UnknownProblem);
        assert!(p.is_null());
        assert!(last_error().contains("no-such-problem"));
        assert_eq!(rbdsde_problem_builtin(ptr::null(), &mut p), RbdsdeStatus::NullPointer);

        let mut n = ptr::null_mut();
        assert_eq!(rbdsde_noise_tree(1.0, 13, &mut n), RbdsdeStatus::Capacity);
        assert_eq!(rbdsde_noise_gaussian(1.0, 4, 100, 1, 1, 3, &mut n), RbdsdeStatus::Ok);
        let q = problem("snell-only");
        let mut s = ptr::null_mut();
        assert_eq!(rbdsde_solve(q, n, 7, 0, &mut s), RbdsdeStatus::InvalidArgument);
        assert_eq!(rbdsde_iterate(q, n, RBDSDE_ENGINE_TREE, 0, 5, 0.0, 0, &mut s, ptr::null_mut()), RbdsdeStatus::InvalidArgument);
        assert_eq!(rbdsde_solve(ptr::null(), n, 0, 0, &mut s), RbdsdeStatus::NullPointer);
        assert!(s.is_null());

        // freeing NULL is a no-op
        rbdsde_solution_free(ptr::null_mut());
        rbdsde_noise_free(n);
        rbdsde_problem_free(q);
    }
    let v = unsafe { CStr::from_ptr(rbdsde_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn gaussian_regression_through_the_abi() {
    unsafe {
        let p = problem("linear-drift");
        let mut n = ptr::null_mut();
        assert_eq!(rbdsde_noise_gaussian(1.0, 5, 2000, 1, 1, 11, &mut n), RbdsdeStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(rbdsde_solve(p, n, RBDSDE_ENGINE_REGRESSION, 2, &mut s), RbdsdeStatus::Ok);
        let mut y0 = 0.0;
        rbdsde_solution_mean_y(s, 0, &mut y0);
        assert!((y0 - 3.0).abs() < 1e-6);
        rbdsde_solution_free(s);
        rbdsde_noise_free(n);
        rbdsde_problem_free(p);
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/rbdsde.h")).unwrap();
    for sym in [
        "rbdsde_version",
        "rbdsde_last_error",
        "rbdsde_problem_builtin",
        "rbdsde_problem_free",
        "rbdsde_noise_tree",
        "rbdsde_noise_gaussian",
        "rbdsde_noise_free",
        "rbdsde_solve",
        "rbdsde_iterate",
        "rbdsde_solution_free",
        "rbdsde_solution_shape",
        "rbdsde_solution_y",
        "rbdsde_solution_k",
        "rbdsde_solution_mean_y",
        "rbdsde_solution_z",
        "typedef struct RbdsdeSolution RbdsdeSolution",
        "RBDSDE_STATUS_NOT_LIPSCHITZ = 6",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "rbdsde.h"

int main(void) {
    RbdsdeProblem *p = NULL;
    RbdsdeNoise *n = NULL;
    RbdsdeSolution *s = NULL;
    bool converged = false;
    double y0 = 1.0;
    if (rbdsde_problem_builtin("step-generator", &p) != RBDSDE_STATUS_OK) return 2;
    if (rbdsde_noise_tree(1.0, 4, &n) != RBDSDE_STATUS_OK) return 3;
    if (rbdsde_solve(p, n, RBDSDE_ENGINE_TREE, 0, &s) != RBDSDE_STATUS_NOT_LIPSCHITZ) return 4;
    if (rbdsde_last_error() == NULL) return 5;
    if (rbdsde_iterate(p, n, RBDSDE_ENGINE_TREE, 0, RBDSDE_SELECT_MINIMAL, 0.0, 0, &s, &converged) != RBDSDE_STATUS_OK) return 6;
    rbdsde_solution_mean_y(s, 0, &y0);
    printf("%s %d %.3e\n", rbdsde_version(), (int)converged, y0);
    rbdsde_solution_free(s);
    rbdsde_noise_free(n);
    rbdsde_problem_free(p);
    return converged && fabs(y0) <= 1e-10 ? 0 : 7;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler on PATH, skipping");
        return;
    };
    // target/<profile>/deps/<test binary> -> target/<profile>
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    assert!(lib_dir.join("librbdsde_ffi.so").exists() || lib_dir.join("librbdsde_ffi.dylib").exists());
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    let exe = work.path().join("smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let build = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&src)
        .arg("-o")
        .arg(&exe)
        .arg("-L")
        .arg(&lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lrbdsde_ffi")
        .arg("-lm")
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}
