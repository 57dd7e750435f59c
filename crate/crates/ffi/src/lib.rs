//! C ABI for `spline_ot`.
//!
//! Every fallible entry point returns a [`SotStatus`]; on failure the message
//! is kept per thread and read back with [`sot_last_error_message`]. Handles
//! are opaque and released with their `_free` function. Panics never cross
//! the boundary; they surface as [`SotStatus::Panic`].
//!
//! Callbacks may be invoked from several threads at once and must be
//! thread-safe for the duration of the call that receives them.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use spline_ot::assembly::{Density, DensityPair};
use spline_ot::bbspline::{BForm, SplineSpace};
use spline_ot::error::Error;
use spline_ot::imaging::DensityDescriptor;
use spline_ot::mae::{poisson_solve, subharmonic_solve, SubharmonicConfig};
use spline_ot::mesh::{make_star_domain, parse_mesh, Point2, Shape, Triangulation};
use spline_ot::transport::{solve_transport, GradientMap, TransportConfig, TransportProblem};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SotStatus {
    Ok = 0,
    NullPointer = 1,
    Parse = 2,
    Geometry = 3,
    Solver = 4,
    Density = 5,
    Io = 6,
    InvalidArgument = 7,
    Panic = 99,
}

/// Triangulation handle.
pub struct SotMesh {
    mesh: Arc<Triangulation>,
}

/// Solved potential; for transport solves also the map's frame shifts.
pub struct SotSolution {
    map: GradientMap,
    report: CString,
}

/// `double f(double x, double y, void *user)`.
pub type SotScalarFn = Option<unsafe extern "C" fn(x: f64, y: f64, user: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SotStatus {
    match e.code() {
        "parse" => SotStatus::Parse,
        "geometry" => SotStatus::Geometry,
        "solver" => SotStatus::Solver,
        "density" => SotStatus::Density,
        "io" => SotStatus::Io,
        _ => SotStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> SotStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            SotStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            SotStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(&msg);
            SotStatus::InvalidArgument
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            SotStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, v: T) {
    *out = Box::into_raw(Box::new(v));
}

/// C callback plus user data, shareable across the solver's threads.
#[derive(Clone, Copy)]
struct Callback {
    f: unsafe extern "C" fn(f64, f64, *mut c_void) -> f64,
    user: usize,
}

// SAFETY: the caller promises the callback is thread-safe for the duration of
// the call (see the crate docs); the pointer is only passed back to it.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Callback {
    fn new(f: SotScalarFn, user: *mut c_void, what: &'static str) -> Result<Self, Fail> {
        Ok(Callback {
            f: f.ok_or(Fail::Null(what))?,
            user: user as usize,
        })
    }

    fn call(&self, p: Point2) -> f64 {
        unsafe { (self.f)(p.x, p.y, self.user as *mut c_void) }
    }
}

fn space(mesh: &SotMesh, degree: usize, smoothness: usize) -> Result<Arc<SplineSpace>, Fail> {
    Ok(Arc::new(SplineSpace::new(
        Arc::clone(&mesh.mesh),
        degree,
        smoothness,
        false,
    )?))
}

fn solution(u: BForm, report: serde_json::Value) -> SotSolution {
    SotSolution {
        map: GradientMap {
            u,
            in_shift: Point2::ORIGIN,
            out_shift: Point2::ORIGIN,
        },
        report: CString::new(report.to_string()).unwrap_or_default(),
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sot_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn sot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a mesh from the text of Triangle `.node` and `.ele` files.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sot_mesh_parse(
    node_text: *const c_char,
    ele_text: *const c_char,
    out: *mut *mut SotMesh,
) -> SotStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let mesh = parse_mesh(text(node_text, "node_text")?, text(ele_text, "ele_text")?)?;
        put(
            out,
            SotMesh {
                mesh: Arc::new(mesh),
            },
        );
        Ok(())
    })
}

/// Builtin domain mesh (`square`, `unit-square`, `disk`, `L`, `moon`, ...).
///
/// # Safety
/// `name` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sot_mesh_builtin(
    name: *const c_char,
    resolution: usize,
    out: *mut *mut SotMesh,
) -> SotStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let mesh = Shape::parse(text(name, "name")?)?.mesh(resolution)?;
        put(
            out,
            SotMesh {
                mesh: Arc::new(mesh),
            },
        );
        Ok(())
    })
}

/// Vertex and triangle counts.
///
/// # Safety
/// `mesh` must come from this library; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sot_mesh_counts(
    mesh: *const SotMesh,
    n_vertices: *mut usize,
    n_triangles: *mut usize,
) -> SotStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or(Fail::Null("mesh"))?;
        if n_vertices.is_null() || n_triangles.is_null() {
            return Err(Fail::Null("outputs"));
        }
        *n_vertices = m.mesh.num_vertices();
        *n_triangles = m.mesh.num_triangles();
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sot_mesh_free(mesh: *mut SotMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Solves `−Δu = rhs` with `u = boundary` on the mesh boundary.
///
/// # Safety
/// `mesh` must come from this library; callbacks must be thread-safe.
#[no_mangle]
pub unsafe extern "C" fn sot_poisson(
    mesh: *const SotMesh,
    degree: usize,
    smoothness: usize,
    rhs: SotScalarFn,
    boundary: SotScalarFn,
    user: *mut c_void,
    out: *mut *mut SotSolution,
) -> SotStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or(Fail::Null("mesh"))?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let (f, g) = (
            Callback::new(rhs, user, "rhs")?,
            Callback::new(boundary, user, "boundary")?,
        );
        let sp = space(m, degree, smoothness)?;
        let (u, rep) = poisson_solve(&sp, |p| f.call(p), |p| g.call(p), None)?;
        let report = serde_json::json!({
            "constraint_residual": rep.constraint_residual,
            "conditioning": rep.conditioning_flag,
        });
        put(out, solution(u, report));
        Ok(())
    })
}

/// Subharmonic iteration for `det D²u = f/g` with constant `g` and
/// Dirichlet data; `f_lower ≤ f ≤ f_upper` on the domain.
///
/// # Safety
/// `mesh` must come from this library; callbacks must be thread-safe.
#[no_mangle]
pub unsafe extern "C" fn sot_mae_dirichlet(
    mesh: *const SotMesh,
    degree: usize,
    smoothness: usize,
    f: SotScalarFn,
    f_lower: f64,
    f_upper: f64,
    g: f64,
    boundary: SotScalarFn,
    user: *mut c_void,
    iterations: usize,
    out: *mut *mut SotSolution,
) -> SotStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or(Fail::Null("mesh"))?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let (fc, bc) = (
            Callback::new(f, user, "f")?,
            Callback::new(boundary, user, "boundary")?,
        );
        let dens = DensityPair::new(
            Density::new("f", f_lower, f_upper, move |p| fc.call(p)),
            Density::constant(g),
        )?;
        let sp = space(m, degree, smoothness)?;
        let cfg = SubharmonicConfig {
            inner_iters: iterations,
            stages: 1,
            ..Default::default()
        };
        let (u, trace) = subharmonic_solve(&sp, &dens, |p| bc.call(p), &cfg)?;
        let report = serde_json::json!({
            "iterations": trace.iterations(),
            "diagnostics": spline_ot::mae::iteration_diagnostics(&trace),
        });
        put(out, solution(u, report));
        Ok(())
    })
}

/// Transport from the mesh's domain onto the star-shaped polygon given by
/// `n_target` interleaved `x, y` pairs. Densities use the descriptor strings
/// of the command line (`const:1`, `gauss:a,b,t,s`, `builtin:name`); a null
/// `g` selects the constant that balances the masses.
///
/// # Safety
/// `mesh` must come from this library; `target_xy` must hold `2 n_target` doubles.
#[no_mangle]
pub unsafe extern "C" fn sot_transport(
    mesh: *const SotMesh,
    target_xy: *const f64,
    n_target: usize,
    f: *const c_char,
    g: *const c_char,
    degree: usize,
    smoothness: usize,
    out: *mut *mut SotSolution,
) -> SotStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or(Fail::Null("mesh"))?;
        if target_xy.is_null() {
            return Err(Fail::Null("target_xy"));
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let xy = std::slice::from_raw_parts(target_xy, 2 * n_target);
        let poly: Vec<Point2> = xy
            .chunks_exact(2)
            .map(|c| Point2::new(c[0], c[1]))
            .collect();
        let w = make_star_domain(&poly, None)?;
        let v = make_star_domain(&m.mesh.outer_boundary(), None)?;
        let fd = text(f, "f")?.parse::<DensityDescriptor>()?.build(&v)?;
        let gd = if g.is_null() {
            Density::constant(spline_ot::transport::constant_target_density(
                &fd, &m.mesh, &w,
            )?)
        } else {
            text(g, "g")?.parse::<DensityDescriptor>()?.build(&w)?
        };
        let problem = TransportProblem::new(v, Arc::clone(&m.mesh), w, DensityPair::new(fd, gd)?)?;
        let cfg = TransportConfig {
            degree,
            smoothness,
            ..Default::default()
        };
        let sol = solve_transport(&problem, &cfg)?;
        let report = serde_json::to_value(&sol.report).map_err(Error::from)?;
        put(
            out,
            SotSolution {
                map: sol.map,
                report: CString::new(report.to_string()).unwrap_or_default(),
            },
        );
        Ok(())
    })
}

/// Value of the potential and its gradient at `(x, y)`.
///
/// # Safety
/// `sol` must come from this library; outputs may be null to skip them.
#[no_mangle]
pub unsafe extern "C" fn sot_solution_eval(
    sol: *const SotSolution,
    x: f64,
    y: f64,
    value: *mut f64,
    gradient: *mut f64,
) -> SotStatus {
    guard(|| {
        let s = sol.as_ref().ok_or(Fail::Null("solution"))?;
        let j = s.map.jet(Point2::new(x, y))?;
        if !value.is_null() {
            *value = j.value;
        }
        if !gradient.is_null() {
            *gradient = j.grad.x;
            *gradient.add(1) = j.grad.y;
        }
        Ok(())
    })
}

/// Image of `(x, y)` under the transport map, written to `out_xy[0..2]`.
///
/// # Safety
/// `sol` must come from this library; `out_xy` must hold two doubles.
#[no_mangle]
pub unsafe extern "C" fn sot_solution_map(
    sol: *const SotSolution,
    x: f64,
    y: f64,
    out_xy: *mut f64,
) -> SotStatus {
    guard(|| {
        let s = sol.as_ref().ok_or(Fail::Null("solution"))?;
        if out_xy.is_null() {
            return Err(Fail::Null("out_xy"));
        }
        let p = s.map.apply(Point2::new(x, y))?;
        *out_xy = p.x;
        *out_xy.add(1) = p.y;
        Ok(())
    })
}

/// Run report as JSON, owned by the solution.
///
/// # Safety
/// `sol` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sot_solution_report_json(sol: *const SotSolution) -> *const c_char {
    match sol.as_ref() {
        Some(s) => s.report.as_ptr(),
        None => std::ptr::null(),
    }
}

/// # Safety
/// `sol` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sot_solution_free(sol: *mut SotSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}
