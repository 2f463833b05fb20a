//! C interface to the `garde` calibration library.
//!
//! Observation sets and calibration results cross the boundary as opaque
//! handles that the caller releases with the matching `*_free` function.
//! Every fallible call returns a [`GardeStatus`]; on failure a message for
//! the calling thread is available from [`garde_last_error_message`].
//!
//! Point arrays are interleaved `x0, y0, x1, y1, ...` in meters.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use garde::error::ErrorClass;
use garde::{CalibrationResult, GardeError, ObservationSet, Point2};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GardeStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument or configuration value is out of range.
    InvalidArgument = 2,
    /// The observations are inconsistent or insufficient.
    Data = 3,
    /// A numerical failure such as a singular or degenerate configuration.
    Numerical = 4,
    /// The library panicked; the handle arguments should be discarded.
    Internal = 5,
}

/// Engine parameters. Obtain defaults from [`garde_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GardeCalibrationConfig {
    pub alpha: f64,
    pub beta: f64,
    pub num_iterations: u32,
    pub num_annealing: u32,
    pub mu0: f64,
    pub mu_decay: f64,
    pub fit_fraction: f64,
    pub min_fit_sources: u32,
    pub rng_seed: u64,
}

impl From<garde::GardeConfig> for GardeCalibrationConfig {
    fn from(c: garde::GardeConfig) -> Self {
        GardeCalibrationConfig {
            alpha: c.alpha,
            beta: c.beta,
            num_iterations: c.num_iterations as u32,
            num_annealing: c.num_annealing as u32,
            mu0: c.mu0,
            mu_decay: c.mu_decay,
            fit_fraction: c.fit_fraction,
            min_fit_sources: c.min_fit_sources as u32,
            rng_seed: c.rng_seed,
        }
    }
}

impl From<GardeCalibrationConfig> for garde::GardeConfig {
    fn from(c: GardeCalibrationConfig) -> Self {
        garde::GardeConfig {
            alpha: c.alpha,
            beta: c.beta,
            num_iterations: c.num_iterations as usize,
            num_annealing: c.num_annealing as usize,
            mu0: c.mu0,
            mu_decay: c.mu_decay,
            fit_fraction: c.fit_fraction,
            min_fit_sources: c.min_fit_sources as usize,
            rng_seed: c.rng_seed,
        }
    }
}

/// Opaque node-by-source distance observations.
pub struct GardeObservations(ObservationSet);

/// Opaque calibration output.
pub struct GardeResult(CalibrationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: GardeStatus, message: impl Into<String>) -> GardeStatus {
    set_last_error(message.into());
    status
}

fn status_of(e: &GardeError) -> GardeStatus {
    match e.class() {
        ErrorClass::Usage => GardeStatus::InvalidArgument,
        ErrorClass::Data => GardeStatus::Data,
        ErrorClass::Numerical => GardeStatus::Numerical,
    }
}

fn from_error(e: GardeError) -> GardeStatus {
    fail(status_of(&e), e.to_string())
}

/// Runs `f` with panics converted to [`GardeStatus::Internal`].
fn guarded(f: impl FnOnce() -> GardeStatus) -> GardeStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(GardeStatus::Internal, "internal panic"),
    }
}

unsafe fn points(xy: *const f64, count: usize) -> Result<Vec<Point2>, GardeStatus> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if xy.is_null() {
        return Err(fail(GardeStatus::NullPointer, "point array is NULL"));
    }
    let raw = slice::from_raw_parts(xy, 2 * count);
    raw.chunks_exact(2)
        .map(|c| Point2::try_new(c[0], c[1]))
        .collect::<garde::Result<Vec<_>>>()
        .map_err(from_error)
}

unsafe fn write_points(points: &[Point2], out_xy: *mut f64, capacity: usize) -> GardeStatus {
    if out_xy.is_null() {
        return fail(GardeStatus::NullPointer, "output array is NULL");
    }
    if capacity < points.len() {
        return fail(
            GardeStatus::InvalidArgument,
            format!("output holds {capacity} points, {} required", points.len()),
        );
    }
    let out = slice::from_raw_parts_mut(out_xy, 2 * points.len());
    for (c, p) in out.chunks_exact_mut(2).zip(points) {
        c[0] = p.x;
        c[1] = p.y;
    }
    GardeStatus::Ok
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. The string stays valid until the next call into the
/// library from the same thread.
#[no_mangle]
pub extern "C" fn garde_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn garde_status_string(status: GardeStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        GardeStatus::Ok => b"ok\0",
        GardeStatus::NullPointer => b"null pointer\0",
        GardeStatus::InvalidArgument => b"invalid argument\0",
        GardeStatus::Data => b"invalid data\0",
        GardeStatus::Numerical => b"numerical failure\0",
        GardeStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn garde_config_default() -> GardeCalibrationConfig {
    garde::GardeConfig::default().into()
}

/// Builds an observation set from `node_count * source_count` row-major
/// distances. `valid` may be NULL (every entry observed); otherwise a
/// nonzero byte marks an observed entry.
///
/// # Safety
/// `distances` must point to `node_count * source_count` readable doubles,
/// `valid` to as many bytes when not NULL, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn garde_observations_new(
    node_count: usize,
    source_count: usize,
    distances: *const f64,
    valid: *const u8,
    out: *mut *mut GardeObservations,
) -> GardeStatus {
    guarded(|| {
        if distances.is_null() || out.is_null() {
            return fail(GardeStatus::NullPointer, "distances and out must not be NULL");
        }
        let Some(len) = node_count.checked_mul(source_count) else {
            return fail(GardeStatus::InvalidArgument, "observation matrix too large");
        };
        let d = slice::from_raw_parts(distances, len).to_vec();
        let mask = if valid.is_null() {
            vec![true; len]
        } else {
            slice::from_raw_parts(valid, len).iter().map(|&b| b != 0).collect()
        };
        match ObservationSet::with_mask(node_count, source_count, d, mask) {
            Ok(obs) => {
                *out = Box::into_raw(Box::new(GardeObservations(obs)));
                GardeStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `obs` must be NULL or a handle from [`garde_observations_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn garde_observations_free(obs: *mut GardeObservations) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// Calibrates nodes and sources. `config` may be NULL for the defaults.
///
/// # Safety
/// `obs` must be a live handle, `config` NULL or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn garde_calibrate(
    obs: *const GardeObservations,
    config: *const GardeCalibrationConfig,
    out: *mut *mut GardeResult,
) -> GardeStatus {
    guarded(|| {
        if obs.is_null() || out.is_null() {
            return fail(GardeStatus::NullPointer, "obs and out must not be NULL");
        }
        let config: garde::GardeConfig = if config.is_null() {
            garde::GardeConfig::default()
        } else {
            (*config).into()
        };
        match garde::run(&(*obs).0, &config) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(GardeResult(r)));
                GardeStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `result` must be NULL or a handle from [`garde_calibrate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn garde_result_free(result: *mut GardeResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn garde_result_node_count(result: *const GardeResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.geometry.node_count())
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn garde_result_source_count(result: *const GardeResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.geometry.source_count())
}

/// Mean absolute residual of the returned geometry, NaN for a NULL handle.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn garde_result_fit_score(result: *const GardeResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.fit_score)
}

/// Copies the node positions into `out_xy`, which holds `capacity` points.
///
/// # Safety
/// `result` must be a live handle and `out_xy` writable for `2 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn garde_result_nodes(
    result: *const GardeResult,
    out_xy: *mut f64,
    capacity: usize,
) -> GardeStatus {
    guarded(|| match result.as_ref() {
        Some(r) => write_points(&r.0.geometry.nodes, out_xy, capacity),
        None => fail(GardeStatus::NullPointer, "result is NULL"),
    })
}

/// Copies the source positions into `out_xy`, which holds `capacity` points.
///
/// # Safety
/// `result` must be a live handle and `out_xy` writable for `2 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn garde_result_sources(
    result: *const GardeResult,
    out_xy: *mut f64,
    capacity: usize,
) -> GardeStatus {
    guarded(|| match result.as_ref() {
        Some(r) => write_points(&r.0.geometry.sources, out_xy, capacity),
        None => fail(GardeStatus::NullPointer, "result is NULL"),
    })
}

/// Copies the indices of the sources kept by the final source selection.
/// `out_len` receives their number; with `out` NULL only the count is returned.
///
/// # Safety
/// `result` must be a live handle, `out_len` writable, and `out` NULL or
/// writable for `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn garde_result_selected_sources(
    result: *const GardeResult,
    out: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> GardeStatus {
    guarded(|| {
        let (Some(r), false) = (result.as_ref(), out_len.is_null()) else {
            return fail(GardeStatus::NullPointer, "result and out_len must not be NULL");
        };
        let sel = &r.0.selected_sources;
        *out_len = sel.len();
        if out.is_null() {
            return GardeStatus::Ok;
        }
        if capacity < sel.len() {
            return fail(
                GardeStatus::InvalidArgument,
                format!("output holds {capacity} indices, {} required", sel.len()),
            );
        }
        slice::from_raw_parts_mut(out, sel.len()).copy_from_slice(sel);
        GardeStatus::Ok
    })
}

/// RMS distance between `estimate` and `reference` after the best rigid
/// alignment; `allow_reflection` also admits mirrored alignments.
///
/// # Safety
/// Both arrays must hold `count` points; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn garde_calibration_error(
    estimate_xy: *const f64,
    reference_xy: *const f64,
    count: usize,
    allow_reflection: bool,
    out: *mut f64,
) -> GardeStatus {
    guarded(|| {
        if out.is_null() {
            return fail(GardeStatus::NullPointer, "out is NULL");
        }
        let est = match points(estimate_xy, count) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let reference = match points(reference_xy, count) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match garde::calibration_error(&est, &reference, allow_reflection) {
            Ok(e) => {
                *out = e;
                GardeStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

unsafe fn bound_with(
    f: fn(&[Point2], Point2, f64) -> garde::Result<f64>,
    anchors_xy: *const f64,
    anchor_count: usize,
    x: f64,
    y: f64,
    sigma_d: f64,
    out: *mut f64,
) -> GardeStatus {
    guarded(|| {
        if out.is_null() {
            return fail(GardeStatus::NullPointer, "out is NULL");
        }
        let anchors = match points(anchors_xy, anchor_count) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let target = match Point2::try_new(x, y) {
            Ok(p) => p,
            Err(e) => return from_error(e),
        };
        match f(&anchors, target, sigma_d) {
            Ok(b) => {
                *out = b;
                GardeStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Cramér-Rao RMSE bound for a source at `(x, y)` ranged by the given nodes.
///
/// # Safety
/// `nodes_xy` must hold `node_count` points; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn garde_source_rmse_bound(
    nodes_xy: *const f64,
    node_count: usize,
    x: f64,
    y: f64,
    sigma_d: f64,
    out: *mut f64,
) -> GardeStatus {
    bound_with(garde::source_rmse_bound, nodes_xy, node_count, x, y, sigma_d, out)
}

/// Cramér-Rao RMSE bound for a node at `(x, y)` ranged by the given sources.
///
/// # Safety
/// `sources_xy` must hold `source_count` points; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn garde_node_rmse_bound(
    sources_xy: *const f64,
    source_count: usize,
    x: f64,
    y: f64,
    sigma_d: f64,
    out: *mut f64,
) -> GardeStatus {
    bound_with(garde::node_rmse_bound, sources_xy, source_count, x, y, sigma_d, out)
}
