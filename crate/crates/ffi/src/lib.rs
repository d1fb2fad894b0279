//! C ABI over the scatmedium solvers.
//!
//! Every function returns an [`SmStatus`]; results go through out-pointers.
//! Handles are opaque and released with the matching `*_free` function.
//! After a failure, [`sm_last_error_message`] describes the error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{Matrix3, Vector3};
use scatmedium::acoustic::{solve_discrete, DiscreteFieldSolution, DiscreteOptions};
use scatmedium::electrostatics::{polarizability, ElectrostaticsOptions};
use scatmedium::ensemble::{Body, BoundaryKind, ParticleEnsemble, Physics};
use scatmedium::geometry::{generate_sphere, load_mesh, SurfaceMesh};
use scatmedium::grid::Region;
use scatmedium::Error;

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Mesh = 3,
    Numerical = 4,
    Regime = 5,
    Io = 6,
    Panic = 7,
}

/// Boundary condition on every body of an ensemble.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmBoundary {
    Dirichlet = 0,
    Neumann = 1,
    Impedance = 2,
}

/// Closed triangulated surface.
pub struct SmMesh(SurfaceMesh);

/// Bodies plus the incident wave.
pub struct SmEnsemble {
    bodies: Vec<Body>,
    physics: Physics,
    region: Region,
}

/// Solved discrete field.
pub struct SmSolution(DiscreteFieldSolution);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SmStatus {
    match e {
        Error::MeshParse { .. }
        | Error::NonManifoldEdge(..)
        | Error::OpenSurface(..)
        | Error::InconsistentOrientation(..)
        | Error::DegenerateTriangle(_) => SmStatus::Mesh,
        Error::Regime(_) => SmStatus::Regime,
        Error::Io(_) | Error::Json(_) => SmStatus::Io,
        e if e.is_numerical() => SmStatus::Numerical,
        _ => SmStatus::InvalidInput,
    }
}

struct Fail(SmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(SmStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SmStatus::Panic
        }
    }
}

unsafe fn read3(p: *const f64, name: &str) -> Result<Vector3<f64>, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    let s = std::slice::from_raw_parts(p, 3);
    Ok(Vector3::new(s[0], s[1], s[2]))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn row_major(m: &Matrix3<f64>) -> [f64; 9] {
    std::array::from_fn(|i| m[(i / 3, i % 3)])
}

/// Copies the last error message of this thread into `buffer` (NUL-terminated,
/// truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buffer` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sm_last_error_message(buffer: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buffer.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buffer, n);
            *buffer.add(n) = 0;
        }
        msg.len()
    })
}

/// Icosphere of the given radius and refinement level.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_mesh_sphere(radius: f64, refinement: u32, out: *mut *mut SmMesh) -> SmStatus {
    guard(|| {
        let mesh = generate_sphere(radius, refinement)?;
        write(out, Box::into_raw(Box::new(SmMesh(mesh))), "out")
    })
}

/// Loads an OFF mesh.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_mesh_load(path: *const c_char, out: *mut *mut SmMesh) -> SmStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(SmStatus::InvalidInput, "path is not UTF-8".into()))?;
        let mesh = load_mesh(path)?;
        write(out, Box::into_raw(Box::new(SmMesh(mesh))), "out")
    })
}

/// # Safety
/// `mesh` must come from `sm_mesh_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sm_mesh_free(mesh: *mut SmMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Triangle count, volume and area of a mesh.
///
/// # Safety
/// `mesh` must be a live handle; the out-pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn sm_mesh_info(mesh: *const SmMesh, triangles: *mut usize, volume: *mut f64, area: *mut f64) -> SmStatus {
    guard(|| {
        let m = &mesh.as_ref().ok_or_else(|| null("mesh"))?.0;
        if !triangles.is_null() {
            *triangles = m.num_triangles();
        }
        if !volume.is_null() {
            *volume = m.volume();
        }
        if !area.is_null() {
            *area = m.area();
        }
        Ok(())
    })
}

/// Capacitance, `α⁽ⁿ⁾(γ)` and `β⁽ⁿ⁾` of a body. Tensors are written row-major
/// into 9-element arrays; `alpha` and `beta` may be null.
///
/// # Safety
/// `mesh` must be a live handle; non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_polarizability(
    mesh: *const SmMesh,
    gamma: f64,
    order: usize,
    capacitance: *mut f64,
    alpha: *mut f64,
    beta: *mut f64,
) -> SmStatus {
    guard(|| {
        let m = &mesh.as_ref().ok_or_else(|| null("mesh"))?.0;
        let p = polarizability(m, gamma, order, &ElectrostaticsOptions::default())?;
        write(capacitance, p.capacitance, "capacitance")?;
        for (dst, src) in [(alpha, &p.alpha), (beta, &p.beta)] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(row_major(src).as_ptr(), dst, 9);
            }
        }
        Ok(())
    })
}

/// Empty ensemble in the box `[min, max]` lit by `e^{ik direction·x}`.
///
/// # Safety
/// `direction`, `min`, `max` must point to 3 doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sm_ensemble_new(
    boundary: SmBoundary,
    wavenumber: f64,
    direction: *const f64,
    min: *const f64,
    max: *const f64,
    out: *mut *mut SmEnsemble,
) -> SmStatus {
    guard(|| {
        let kind = match boundary {
            SmBoundary::Dirichlet => BoundaryKind::Dirichlet,
            SmBoundary::Neumann => BoundaryKind::Neumann,
            SmBoundary::Impedance => BoundaryKind::Impedance,
        };
        let physics = Physics::new(kind, wavenumber, read3(direction, "direction")?)?;
        let region = Region::new(read3(min, "min")?.into(), read3(max, "max")?.into())?;
        let e = SmEnsemble {
            bodies: Vec::new(),
            physics,
            region,
        };
        write(out, Box::into_raw(Box::new(e)), "out")
    })
}

/// # Safety
/// `ensemble` must come from `sm_ensemble_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sm_ensemble_free(ensemble: *mut SmEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Adds a body with explicit properties; `beta` is row-major (9 doubles).
///
/// # Safety
/// `ensemble` must be a live handle; `position` 3 and `beta` 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn sm_ensemble_add_body(
    ensemble: *mut SmEnsemble,
    position: *const f64,
    capacitance: f64,
    volume: f64,
    area: f64,
    beta: *const f64,
    h: f64,
) -> SmStatus {
    guard(|| {
        let e = ensemble.as_mut().ok_or_else(|| null("ensemble"))?;
        if beta.is_null() {
            return Err(null("beta"));
        }
        let b = std::slice::from_raw_parts(beta, 9);
        let position = read3(position, "position")?;
        if !e.region.contains(&position) {
            return Err(Fail(SmStatus::InvalidInput, "position lies outside the ensemble region".into()));
        }
        if ![capacitance, volume, area, h].iter().all(|v| *v >= 0.0) {
            return Err(Fail(SmStatus::InvalidInput, "body properties must be non-negative".into()));
        }
        e.bodies.push(Body {
            position,
            capacitance,
            volume,
            area,
            beta: Matrix3::from_row_slice(b),
            h,
            radius: None,
            alpha: None,
            beta_tilde: None,
        });
        Ok(())
    })
}

/// Adds an analytic sphere of radius `radius` (`C = 4πa`, `β = −3/2 I`).
///
/// # Safety
/// `ensemble` must be a live handle; `position` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn sm_ensemble_add_sphere(ensemble: *mut SmEnsemble, position: *const f64, radius: f64, h: f64) -> SmStatus {
    if !(radius > 0.0) {
        set_error("radius must be positive".into());
        return SmStatus::InvalidInput;
    }
    let pi = std::f64::consts::PI;
    let beta = row_major(&(Matrix3::identity() * -1.5));
    let status = sm_ensemble_add_body(
        ensemble,
        position,
        4.0 * pi * radius,
        4.0 / 3.0 * pi * radius.powi(3),
        4.0 * pi * radius * radius,
        beta.as_ptr(),
        h,
    );
    if status == SmStatus::Ok {
        if let Some(b) = ensemble.as_mut().and_then(|e| e.bodies.last_mut()) {
            b.radius = Some(radius);
        }
    }
    status
}

/// # Safety
/// `ensemble` must be a live handle; `len` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_ensemble_len(ensemble: *const SmEnsemble, len: *mut usize) -> SmStatus {
    guard(|| {
        let e = ensemble.as_ref().ok_or_else(|| null("ensemble"))?;
        write(len, e.bodies.len(), "len")
    })
}

/// Solves the self-consistent system for the ensemble's boundary kind.
///
/// # Safety
/// `ensemble` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_solve(ensemble: *const SmEnsemble, out: *mut *mut SmSolution) -> SmStatus {
    guard(|| {
        let e = ensemble.as_ref().ok_or_else(|| null("ensemble"))?;
        let ens = ParticleEnsemble::new(e.bodies.clone(), e.physics, e.region)?;
        let sol = solve_discrete(&ens, &DiscreteOptions::default())?;
        write(out, Box::into_raw(Box::new(SmSolution(sol))), "out")
    })
}

/// # Safety
/// `solution` must come from `sm_solve` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sm_solution_free(solution: *mut SmSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Relative residual of the linear solve.
///
/// # Safety
/// `solution` must be a live handle; `residual` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_solution_residual(solution: *const SmSolution, residual: *mut f64) -> SmStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        write(residual, s.0.report.relative_residual, "residual")
    })
}

unsafe fn map_points(
    solution: *const SmSolution,
    points: *const f64,
    count: usize,
    values: *mut f64,
    f: impl Fn(&DiscreteFieldSolution, &[Vector3<f64>]) -> Vec<scatmedium::green::C64>,
) -> SmStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if count == 0 {
            return Ok(());
        }
        if points.is_null() {
            return Err(null("points"));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        let pts: Vec<Vector3<f64>> = std::slice::from_raw_parts(points, 3 * count)
            .chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect();
        let out = std::slice::from_raw_parts_mut(values, 2 * count);
        for (dst, v) in out.chunks_exact_mut(2).zip(f(&s.0, &pts)) {
            dst[0] = v.re;
            dst[1] = v.im;
        }
        Ok(())
    })
}

/// Total field at `count` points (`3·count` doubles); writes `2·count`
/// doubles as interleaved real and imaginary parts.
///
/// # Safety
/// Arrays must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn sm_solution_evaluate(solution: *const SmSolution, points: *const f64, count: usize, values: *mut f64) -> SmStatus {
    map_points(solution, points, count, values, |s, p| s.evaluate(p))
}

/// Far-field amplitude in `count` directions, same layout as
/// [`sm_solution_evaluate`].
///
/// # Safety
/// Arrays must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn sm_solution_far_field(
    solution: *const SmSolution,
    directions: *const f64,
    count: usize,
    values: *mut f64,
) -> SmStatus {
    map_points(solution, directions, count, values, |s, d| s.far_field(d))
}
