use std::f64::consts::PI;
use std::ffi::CString;
use std::ptr;

use scatmedium_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { sm_last_error_message(buf.as_mut_ptr().cast(), buf.len()) };
    buf.truncate(n.min(255));
    String::from_utf8(buf).unwrap()
}

fn box_ensemble(boundary: SmBoundary, k: f64) -> *mut SmEnsemble {
    let mut e = ptr::null_mut();
    let dir = [0.0, 0.0, 1.0];
    let (lo, hi) = ([-1.0; 3], [1.0; 3]);
    let s = unsafe { sm_ensemble_new(boundary, k, dir.as_ptr(), lo.as_ptr(), hi.as_ptr(), &mut e) };
    assert_eq!(s, SmStatus::Ok);
    e
}

#[test]
fn sphere_capacitance_and_polarizability() {
    let mut mesh = ptr::null_mut();
    unsafe {
        assert_eq!(sm_mesh_sphere(1.0, 3, &mut mesh), SmStatus::Ok);
        let (mut tri, mut vol) = (0usize, 0.0);
        assert_eq!(sm_mesh_info(mesh, &mut tri, &mut vol, ptr::null_mut()), SmStatus::Ok);
        assert_eq!(tri, 1280);
        assert!((vol / (4.0 / 3.0 * PI) - 1.0).abs() < 2e-2);

        let (mut c, mut alpha, mut beta) = (0.0, [0.0; 9], [0.0; 9]);
        let s = sm_polarizability(mesh, 0.5, 4, &mut c, alpha.as_mut_ptr(), beta.as_mut_ptr());
        assert_eq!(s, SmStatus::Ok, "{}", last_error());
        assert!((c / (4.0 * PI) - 1.0).abs() < 1e-2, "{c}");
        assert!((alpha[0] - alpha[4]).abs() < 1e-2 && alpha[1].abs() < 1e-2);
        assert!((beta[8] + 1.5).abs() < 0.05, "{}", beta[8]);
        sm_mesh_free(mesh);
    }
}

#[test]
fn null_pointers_and_bad_input_are_reported() {
    unsafe {
        assert_eq!(sm_mesh_sphere(1.0, 1, ptr::null_mut()), SmStatus::NullPointer);
        assert!(last_error().contains("out"));

        let mut mesh = ptr::null_mut();
        assert_eq!(sm_mesh_sphere(-1.0, 1, &mut mesh), SmStatus::InvalidInput);
        assert!(mesh.is_null());

        let mut c = 0.0;
        let s = sm_polarizability(ptr::null(), 0.5, 2, &mut c, ptr::null_mut(), ptr::null_mut());
        assert_eq!(s, SmStatus::NullPointer);

        let path = CString::new("/nonexistent/body.off").unwrap();
        assert_eq!(sm_mesh_load(path.as_ptr(), &mut mesh), SmStatus::Io);

        let e = box_ensemble(SmBoundary::Dirichlet, 1.0);
        let outside = [5.0, 0.0, 0.0];
        assert_eq!(sm_ensemble_add_sphere(e, outside.as_ptr(), 0.01, 0.0), SmStatus::InvalidInput);
        assert_eq!(sm_ensemble_add_sphere(e, [0.0; 3].as_ptr(), 0.0, 0.0), SmStatus::InvalidInput);
        sm_ensemble_free(e);

        let mut e = ptr::null_mut();
        let z = [0.0; 3];
        let s = sm_ensemble_new(SmBoundary::Dirichlet, 1.0, z.as_ptr(), [-1.0; 3].as_ptr(), [1.0; 3].as_ptr(), &mut e);
        assert_eq!(s, SmStatus::InvalidInput);

        sm_mesh_free(ptr::null_mut());
        sm_ensemble_free(ptr::null_mut());
        sm_solution_free(ptr::null_mut());
    }
}

#[test]
fn empty_ensemble_gives_the_incident_wave() {
    unsafe {
        let e = box_ensemble(SmBoundary::Neumann, 3.0);
        let mut sol = ptr::null_mut();
        assert_eq!(sm_solve(e, &mut sol), SmStatus::Ok, "{}", last_error());
        let pts = [0.0, 0.0, 0.25, 1.0, 2.0, -0.5];
        let mut vals = [0.0; 4];
        assert_eq!(sm_solution_evaluate(sol, pts.as_ptr(), 2, vals.as_mut_ptr()), SmStatus::Ok);
        for (i, z) in [0.25f64, -0.5].iter().enumerate() {
            assert!((vals[2 * i] - (3.0 * z).cos()).abs() < 1e-15);
            assert!((vals[2 * i + 1] - (3.0 * z).sin()).abs() < 1e-15);
        }
        sm_solution_free(sol);
        sm_ensemble_free(e);
    }
}

#[test]
fn single_soft_sphere_matches_the_direct_solver() {
    let a = 0.01;
    let k = 1.0;
    unsafe {
        let e = box_ensemble(SmBoundary::Dirichlet, k);
        assert_eq!(sm_ensemble_add_sphere(e, [0.0; 3].as_ptr(), a, 0.0), SmStatus::Ok);
        let mut n = 0;
        sm_ensemble_len(e, &mut n);
        assert_eq!(n, 1);
        let mut sol = ptr::null_mut();
        assert_eq!(sm_solve(e, &mut sol), SmStatus::Ok, "{}", last_error());
        let mut res = 1.0;
        sm_solution_residual(sol, &mut res);
        assert!(res < 1e-10);

        // u(x) = e^{ikz} - C g(x, 0)
        let c = 4.0 * PI * a;
        let x = [0.0, 0.0, 0.5];
        let mut v = [0.0; 2];
        sm_solution_evaluate(sol, x.as_ptr(), 1, v.as_mut_ptr());
        let r: f64 = 0.5;
        let g = (k * r).cos() / (4.0 * PI * r);
        let gi = (k * r).sin() / (4.0 * PI * r);
        assert!((v[0] - ((k * r).cos() - c * g)).abs() < 1e-12, "{v:?}");
        assert!((v[1] - ((k * r).sin() - c * gi)).abs() < 1e-12, "{v:?}");

        let d = [0.0, 0.0, 1.0];
        let mut f = [0.0; 2];
        assert_eq!(sm_solution_far_field(sol, d.as_ptr(), 1, f.as_mut_ptr()), SmStatus::Ok);
        assert!(f[0] < 0.0 && (f[0] + c / (4.0 * PI)).abs() < 1e-6 * c, "{f:?}");

        sm_solution_free(sol);
        sm_ensemble_free(e);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/scatmedium.h")).unwrap();
    for name in [
        "sm_last_error_message",
        "sm_mesh_sphere",
        "sm_polarizability",
        "sm_ensemble_add_sphere",
        "sm_solve",
        "sm_solution_evaluate",
        "sm_solution_far_field",
        "SM_STATUS_NUMERICAL",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let src = std::env::temp_dir().join("scatmedium_header_check.c");
    std::fs::write(&src, "#include \"scatmedium.h\"\nint main(void) { return SM_STATUS_OK; }\n").unwrap();
    let Ok(status) = std::process::Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(format!("{dir}/include"))
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(status.success());
}
