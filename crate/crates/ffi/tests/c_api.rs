use std::f64::consts::PI;
use std::ffi::{c_void, CStr, CString};
use std::ptr;

use spline_ot_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sot_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn builtin(name: &str, res: usize) -> *mut SotMesh {
    let name = CString::new(name).unwrap();
    let mut mesh = ptr::null_mut();
    assert_eq!(
        unsafe { sot_mesh_builtin(name.as_ptr(), res, &mut mesh) },
        SotStatus::Ok
    );
    mesh
}

unsafe extern "C" fn sin_rhs(x: f64, y: f64, _: *mut c_void) -> f64 {
    2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()
}

unsafe extern "C" fn zero(_: f64, _: f64, _: *mut c_void) -> f64 {
    0.0
}

unsafe extern "C" fn exp_det(x: f64, y: f64, _: *mut c_void) -> f64 {
    let r = x * x + y * y;
    (1.0 + r) * r.exp()
}

/// Boundary data scaled by a value read through the user pointer.
unsafe extern "C" fn exp_bc(x: f64, y: f64, user: *mut c_void) -> f64 {
    let scale = *(user as *const f64);
    scale * (0.5 * (x * x + y * y)).exp()
}

#[test]
fn mesh_parse_and_counts() {
    let node = CString::new("4 2 0 0\n1 0 0\n2 1 0\n3 1 1\n4 0 1\n").unwrap();
    let ele = CString::new("2 3 0\n1 1 2 3\n2 1 3 4\n").unwrap();
    let mut mesh = ptr::null_mut();
    assert_eq!(
        unsafe { sot_mesh_parse(node.as_ptr(), ele.as_ptr(), &mut mesh) },
        SotStatus::Ok
    );
    assert!(last_error().is_empty());
    let (mut nv, mut nt) = (0, 0);
    assert_eq!(
        unsafe { sot_mesh_counts(mesh, &mut nv, &mut nt) },
        SotStatus::Ok
    );
    assert_eq!((nv, nt), (4, 2));
    unsafe { sot_mesh_free(mesh) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut mesh = ptr::null_mut();
    let bad = CString::new("not a node file").unwrap();
    let ele = CString::new("1 3 0\n1 1 2 3\n").unwrap();
    assert_eq!(
        unsafe { sot_mesh_parse(bad.as_ptr(), ele.as_ptr(), &mut mesh) },
        SotStatus::Parse
    );
    assert!(!last_error().is_empty());
    assert!(mesh.is_null());

    assert_eq!(
        unsafe { sot_mesh_parse(ptr::null(), ele.as_ptr(), &mut mesh) },
        SotStatus::NullPointer
    );
    let unknown = CString::new("dodecahedron").unwrap();
    assert_ne!(
        unsafe { sot_mesh_builtin(unknown.as_ptr(), 4, &mut mesh) },
        SotStatus::Ok
    );

    // D < 3r + 2 without force.
    let m = builtin("unit-square", 2);
    let mut sol = ptr::null_mut();
    let s = unsafe {
        sot_poisson(
            m,
            4,
            1,
            Some(sin_rhs),
            Some(zero),
            ptr::null_mut(),
            &mut sol,
        )
    };
    assert_eq!(s, SotStatus::InvalidArgument);
    assert!(last_error().contains("3r"), "{}", last_error());
    let s = unsafe { sot_poisson(m, 5, 1, None, Some(zero), ptr::null_mut(), &mut sol) };
    assert_eq!(s, SotStatus::NullPointer);
    unsafe { sot_mesh_free(m) };
    unsafe { sot_mesh_free(ptr::null_mut()) };
    unsafe { sot_solution_free(ptr::null_mut()) };
}

#[test]
fn poisson_through_the_c_api() {
    let m = builtin("unit-square", 4);
    let mut sol = ptr::null_mut();
    let s = unsafe {
        sot_poisson(
            m,
            8,
            2,
            Some(sin_rhs),
            Some(zero),
            ptr::null_mut(),
            &mut sol,
        )
    };
    assert_eq!(s, SotStatus::Ok, "{}", last_error());
    let (mut v, mut g) = (0.0, [0.0; 2]);
    assert_eq!(
        unsafe { sot_solution_eval(sol, 0.3, 0.6, &mut v, g.as_mut_ptr()) },
        SotStatus::Ok
    );
    let exact = (0.3 * PI).sin() * (0.6 * PI).sin();
    assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
    assert!((g[0] - PI * (0.3 * PI).cos() * (0.6 * PI).sin()).abs() < 1e-4);
    // Outside the mesh.
    assert_eq!(
        unsafe { sot_solution_eval(sol, 3.0, 3.0, &mut v, ptr::null_mut()) },
        SotStatus::Geometry
    );
    let report = unsafe { CStr::from_ptr(sot_solution_report_json(sol)) }
        .to_str()
        .unwrap();
    assert!(serde_json::from_str::<serde_json::Value>(report).is_ok());
    unsafe { sot_solution_free(sol) };
    unsafe { sot_mesh_free(m) };
}

#[test]
fn mae_uses_the_user_pointer() {
    let m = builtin("square", 4);
    let mut sol = ptr::null_mut();
    let mut one = 1.0f64;
    let user = &mut one as *mut f64 as *mut c_void;
    let s = unsafe {
        sot_mae_dirichlet(
            m,
            8,
            2,
            Some(exp_det),
            1.0,
            3.0 * 2f64.exp(),
            1.0,
            Some(exp_bc),
            user,
            20,
            &mut sol,
        )
    };
    assert_eq!(s, SotStatus::Ok, "{}", last_error());
    let mut v = 0.0;
    unsafe { sot_solution_eval(sol, 0.2, -0.4, &mut v, ptr::null_mut()) };
    assert!((v - 0.1f64.exp()).abs() < 1e-6, "{v}");
    unsafe { sot_solution_free(sol) };
    unsafe { sot_mesh_free(m) };
}

#[test]
fn translation_transport() {
    let m = builtin("unit-square", 4);
    let target = [1.0, 0.0, 2.0, 0.0, 2.0, 1.0, 1.0, 1.0];
    let f = CString::new("const:1").unwrap();
    let mut sol = ptr::null_mut();
    let s = unsafe {
        sot_transport(
            m,
            target.as_ptr(),
            4,
            f.as_ptr(),
            ptr::null(),
            5,
            1,
            &mut sol,
        )
    };
    assert_eq!(s, SotStatus::Ok, "{}", last_error());
    let mut y = [0.0; 2];
    assert_eq!(
        unsafe { sot_solution_map(sol, 0.25, 0.75, y.as_mut_ptr()) },
        SotStatus::Ok
    );
    assert!(
        (y[0] - 1.25).abs() < 1e-8 && (y[1] - 0.75).abs() < 1e-8,
        "{y:?}"
    );
    let report: serde_json::Value = serde_json::from_str(
        unsafe { CStr::from_ptr(sot_solution_report_json(sol)) }
            .to_str()
            .unwrap(),
    )
    .unwrap();
    assert!((report["cost"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    unsafe { sot_solution_free(sol) };
    unsafe { sot_mesh_free(m) };
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(sot_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/spline_ot.h");
    let text = std::fs::read_to_string(header).unwrap();
    for sym in [
        "sot_mesh_parse",
        "sot_transport",
        "SOT_STATUS_PANIC = 99",
        "typedef struct SotSolution",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    // Compile check when a C compiler is around.
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        return;
    };
    if !cc.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"spline_ot.h\"\nint main(void) { SotMesh *m = 0; size_t a, b;\n\
         return sot_mesh_counts(m, &a, &b) == SOT_STATUS_NULL_POINTER ? 0 : 1; }\n",
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
