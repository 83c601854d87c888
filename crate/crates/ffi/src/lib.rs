//! C ABI over `proxekit`.
//!
//! Objects cross the boundary as opaque handles released with their `_free`
//! function. Every fallible call returns a [`PxStatus`]; on failure the
//! message is available from [`px_last_error_message`] on the same thread.
//! Strings returned to C are released with [`px_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use proxekit::dsl::{apply_script, parse_script};
use proxekit::fit::decompose;
use proxekit::metrics::{chamfer_accelerated, grid_iou};
use proxekit::pipeline::{run_files, PipelineConfig};
use proxekit::voxel::voxelize_proxy;
use proxekit::{OccupancyGrid, Proxy, SuperquadricParams, Vec3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// A parsed primitive set.
pub struct PxProxy(Proxy);

/// An `N³` occupancy grid.
pub struct PxGrid(OccupancyGrid);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl std::fmt::Display) {
    let text = CString::new(msg.to_string().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: PxStatus, msg: impl std::fmt::Display) -> PxStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into [`PxStatus::Panic`].
fn guard(f: impl FnOnce() -> PxStatus) -> PxStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(PxStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, PxStatus> {
    if p.is_null() {
        return Err(fail(PxStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(PxStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn points_arg(p: *const f64, count: usize, name: &str) -> Result<Vec<Vec3>, PxStatus> {
    if p.is_null() && count > 0 {
        return Err(fail(PxStatus::NullPointer, format!("{name} is null")));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let flat = std::slice::from_raw_parts(p, count * 3);
    Ok(flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PxStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message of the last failed call on this thread, or null. Free with
/// [`px_string_free`].
#[no_mangle]
pub extern "C" fn px_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |m| m.clone().into_raw()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn px_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a proxy from JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn px_proxy_load_json(json: *const c_char, out: *mut *mut PxProxy) -> PxStatus {
    guard(|| {
        non_null!(out);
        let text = try_status!(str_arg(json, "json"));
        match Proxy::from_json(text) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(PxProxy(p)));
                PxStatus::Ok
            }
            Err(e) => fail(PxStatus::InvalidInput, e),
        }
    })
}

/// Serializes a proxy to JSON. Free the result with [`px_string_free`].
///
/// # Safety
/// `proxy` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn px_proxy_save_json(proxy: *const PxProxy, out: *mut *mut c_char) -> PxStatus {
    guard(|| {
        non_null!(proxy, out);
        let json = CString::new((*proxy).0.to_json()).expect("JSON has no nul bytes");
        *out = json.into_raw();
        PxStatus::Ok
    })
}

/// Applies an edit script, producing a new proxy.
///
/// # Safety
/// `proxy` must be a live handle, `script` a nul-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn px_proxy_apply_script(
    proxy: *const PxProxy,
    script: *const c_char,
    out: *mut *mut PxProxy,
) -> PxStatus {
    guard(|| {
        non_null!(proxy, out);
        let text = try_status!(str_arg(script, "script"));
        let edited = parse_script(text).and_then(|s| apply_script(&s, &(*proxy).0));
        match edited {
            Ok(p) => {
                *out = Box::into_raw(Box::new(PxProxy(p)));
                PxStatus::Ok
            }
            Err(e) => fail(PxStatus::InvalidInput, e),
        }
    })
}

/// Number of primitives, or 0 for a null handle.
///
/// # Safety
/// `proxy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn px_proxy_len(proxy: *const PxProxy) -> usize {
    if proxy.is_null() {
        0
    } else {
        (*proxy).0.len()
    }
}

/// # Safety
/// `proxy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn px_proxy_free(proxy: *mut PxProxy) {
    if !proxy.is_null() {
        drop(Box::from_raw(proxy));
    }
}

/// Implicit value of the primitive `params` (11 numbers: scale, shape,
/// translation, rotation) at `point` (3 numbers).
///
/// # Safety
/// `params` must point to 11 doubles, `point` to 3, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn px_sq_implicit_value(params: *const f64, point: *const f64, out: *mut f64) -> PxStatus {
    guard(|| {
        non_null!(params, point, out);
        let mut v = [0.0; 11];
        v.copy_from_slice(std::slice::from_raw_parts(params, 11));
        let q = match SuperquadricParams::from_array(v) {
            Ok(q) => q,
            Err(e) => return fail(PxStatus::InvalidInput, e),
        };
        let p = std::slice::from_raw_parts(point, 3);
        *out = q.implicit_value(&Vec3::new(p[0], p[1], p[2]));
        PxStatus::Ok
    })
}

/// Decomposes `count` points (`3 * count` doubles, xyz interleaved) into at
/// most `k` superquadrics.
///
/// # Safety
/// `points` must hold `3 * count` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn px_fit_decompose(
    points: *const f64,
    count: usize,
    k: usize,
    seed: u64,
    out: *mut *mut PxProxy,
) -> PxStatus {
    guard(|| {
        non_null!(out);
        let pts = try_status!(points_arg(points, count, "points"));
        match decompose(&pts, k, seed) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(PxProxy(p)));
                PxStatus::Ok
            }
            Err(e @ proxekit::fit::FitError::DecompositionFailed) => fail(PxStatus::Numerical, e),
            Err(e) => fail(PxStatus::InvalidInput, e),
        }
    })
}

/// Voxelizes every primitive of `proxy` on an `n³` grid.
///
/// # Safety
/// `proxy` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn px_grid_voxelize_proxy(proxy: *const PxProxy, n: usize, out: *mut *mut PxGrid) -> PxStatus {
    guard(|| {
        non_null!(proxy, out);
        match voxelize_proxy(&(*proxy).0, None, n) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(PxGrid(g)));
                PxStatus::Ok
            }
            Err(e) => fail(PxStatus::InvalidInput, e),
        }
    })
}

/// Cells per axis, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn px_grid_resolution(grid: *const PxGrid) -> usize {
    if grid.is_null() {
        0
    } else {
        (*grid).0.resolution()
    }
}

/// Occupied cell count, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn px_grid_count(grid: *const PxGrid) -> usize {
    if grid.is_null() {
        0
    } else {
        (*grid).0.count()
    }
}

/// Copies the `n³` cells (0 or 1, x-fastest) into `buf`.
///
/// # Safety
/// `grid` must be a live handle and `buf` hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn px_grid_get_cells(grid: *const PxGrid, buf: *mut u8, len: usize) -> PxStatus {
    guard(|| {
        non_null!(grid, buf);
        let cells = (*grid).0.cells();
        if len != cells.len() {
            return fail(PxStatus::InvalidInput, format!("buffer holds {len} bytes, grid has {} cells", cells.len()));
        }
        let dst = std::slice::from_raw_parts_mut(buf, len);
        for (d, &c) in dst.iter_mut().zip(cells) {
            *d = c as u8;
        }
        PxStatus::Ok
    })
}

/// # Safety
/// `grid` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn px_grid_free(grid: *mut PxGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Intersection over union; 1 when both grids are empty.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn px_grid_iou(a: *const PxGrid, b: *const PxGrid, out: *mut f64) -> PxStatus {
    guard(|| {
        non_null!(a, b, out);
        match grid_iou(&(*a).0, &(*b).0) {
            Ok(v) => {
                *out = v;
                PxStatus::Ok
            }
            Err(e) => fail(PxStatus::InvalidInput, e),
        }
    })
}

/// Symmetric mean squared nearest-neighbor distance between two point sets.
///
/// # Safety
/// `a` must hold `3 * na` doubles, `b` `3 * nb`, and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn px_chamfer(a: *const f64, na: usize, b: *const f64, nb: usize, out: *mut f64) -> PxStatus {
    guard(|| {
        non_null!(out);
        let pa = try_status!(points_arg(a, na, "a"));
        let pb = try_status!(points_arg(b, nb, "b"));
        match chamfer_accelerated(&pa, &pb) {
            Ok(v) => {
                *out = v;
                PxStatus::Ok
            }
            Err(e) => fail(PxStatus::InvalidInput, e),
        }
    })
}

/// Runs the edit pipeline with default settings at resolution `n` and
/// writes every stage file into `out_dir`. `iou_out` receives the output's
/// IoU against the voxelized input and may be null.
///
/// # Safety
/// Path arguments must be nul-terminated strings; `iou_out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn px_pipeline_run(
    mesh_path: *const c_char,
    proxy_path: *const c_char,
    script_path: *const c_char,
    out_dir: *const c_char,
    n: usize,
    iou_out: *mut f64,
) -> PxStatus {
    guard(|| {
        let mesh = try_status!(str_arg(mesh_path, "mesh_path"));
        let proxy = try_status!(str_arg(proxy_path, "proxy_path"));
        let script = try_status!(str_arg(script_path, "script_path"));
        let dir = try_status!(str_arg(out_dir, "out_dir"));
        let cfg = PipelineConfig { resolution: n, ..PipelineConfig::default() };
        match run_files(Path::new(mesh), Path::new(proxy), Path::new(script), Path::new(dir), &cfg) {
            Ok(out) => {
                if !iou_out.is_null() {
                    *iou_out = out.report.iou;
                }
                PxStatus::Ok
            }
            Err(e) => {
                let status = match e.exit_code() {
                    proxekit::error::EXIT_NUMERIC => PxStatus::Numerical,
                    _ if is_io(&e) => PxStatus::Io,
                    _ => PxStatus::InvalidInput,
                };
                fail(status, e)
            }
        }
    })
}

fn is_io(e: &proxekit::Error) -> bool {
    match e {
        proxekit::Error::Io(proxekit::io::IoError::File { .. }) => true,
        proxekit::Error::Stage { source, .. } => is_io(source),
        _ => false,
    }
}
