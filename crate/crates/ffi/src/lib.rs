//! C interface to `mpe_core`.
//!
//! A model is created from configuration text and owned through an opaque
//! [`MpeModel`] pointer. Every fallible call returns an [`MpeStatus`]; on a
//! non-`Ok` status the message is kept per thread and read back with
//! [`mpe_last_error`]. A handle must not be used from two threads at once.
//!
//! Field buffers hold interior values only, k-major then j then i, the same
//! order as snapshot files.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mpe_core::analysis::BoundLimits;
use mpe_core::stepper::run::record;
use mpe_core::stepper::Model;
use mpe_core::{Config, Error, ModelState};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Invariant = 4,
    /// Non-convergence, non-finite values or a failed compatibility check
    /// while stepping. The model keeps its last good state.
    Runtime = 5,
    Io = 6,
    BufferTooSmall = 7,
    InvalidArgument = 8,
    Panic = 9,
}

/// Fields readable with [`mpe_model_copy_field`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpeField {
    V1 = 0,
    V2 = 1,
    T = 2,
    Qv = 3,
    Qc = 4,
    Qr = 5,
    Phi = 6,
    /// On the `np + 1` pressure faces.
    W = 7,
    /// Surface geopotential, one level.
    PhiS = 8,
}

/// Bits of [`MpeDiagnostics::bound_flags`].
pub const MPE_FLAG_QV: u32 = 1;
pub const MPE_FLAG_QC: u32 = 2;
pub const MPE_FLAG_QR: u32 = 4;
pub const MPE_FLAG_T: u32 = 8;

/// Summary of the current state.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MpeDiagnostics {
    pub time: f64,
    pub step: u64,
    pub v_l2: f64,
    pub v_h1: f64,
    pub t_l2: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub qv_min: f64,
    pub qv_max: f64,
    pub qc_min: f64,
    pub qc_max: f64,
    pub qr_min: f64,
    pub qr_max: f64,
    pub continuity_residual: f64,
    pub w_top: f64,
    pub div_top: f64,
    pub dn_v_lateral: f64,
    pub projection_residual: f64,
    pub projection_iterations: u64,
    /// `MPE_FLAG_*` bits set for fields above their a priori bound.
    pub bound_flags: u32,
}

/// Opaque simulation handle.
pub struct MpeModel {
    model: Model,
    state: ModelState,
    limits: BoundLimits,
    last_dt: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> MpeStatus {
    match err {
        Error::ConfigParse { .. } => MpeStatus::Config,
        Error::Invariant(_) => MpeStatus::Invariant,
        Error::Io { .. } | Error::Exists(_) | Error::Snapshot { .. } | Error::Json(_) => MpeStatus::Io,
        Error::SeriesTooShort(_) => MpeStatus::InvalidArgument,
        e if e.is_runtime_fault() => MpeStatus::Runtime,
        _ => MpeStatus::Invariant,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (MpeStatus, String)>) -> MpeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MpeStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            MpeStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (MpeStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (MpeStatus, String) {
    (MpeStatus::NullPointer, "null pointer argument".into())
}

unsafe fn model_mut<'a>(h: *mut MpeModel) -> Result<&'a mut MpeModel, (MpeStatus, String)> {
    h.as_mut().ok_or_else(null)
}

unsafe fn model_ref<'a>(h: *const MpeModel) -> Result<&'a MpeModel, (MpeStatus, String)> {
    h.as_ref().ok_or_else(null)
}

/// Builds a model from configuration text and its initial state.
///
/// # Safety
/// `config` must be a NUL-terminated string or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpe_model_new(config: *const c_char, out: *mut *mut MpeModel) -> MpeStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|e| (MpeStatus::InvalidUtf8, e.to_string()))?;
        let cfg = Config::parse(text).map_err(core_err)?;
        let mut model = Model::new(cfg).map_err(core_err)?;
        let state = model.initial_state().map_err(core_err)?;
        let limits = BoundLimits::from_initial(&state, &model.cfg.boundary);
        *out = Box::into_raw(Box::new(MpeModel {
            model,
            state,
            limits,
            last_dt: 0.0,
        }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` must come from [`mpe_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mpe_model_free(h: *mut MpeModel) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Advances one step. `dt <= 0` selects the configured step (fixed or
/// adaptive). On failure the state is left unchanged.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpe_model_step(h: *mut MpeModel, dt: f64) -> MpeStatus {
    guard(|| {
        let m = model_mut(h)?;
        if dt.is_nan() {
            return Err((MpeStatus::InvalidArgument, "dt is NaN".into()));
        }
        let dt = if dt > 0.0 { dt } else { m.model.choose_dt(&m.state).dt };
        m.state = m.model.step(&m.state, dt).map_err(core_err)?;
        m.last_dt = dt;
        Ok(())
    })
}

/// Advances `steps` configured steps; stops at the first failure.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpe_model_run(h: *mut MpeModel, steps: u64) -> MpeStatus {
    for _ in 0..steps {
        let s = mpe_model_step(h, 0.0);
        if s != MpeStatus::Ok {
            return s;
        }
    }
    if h.is_null() {
        set_error("null pointer argument");
        return MpeStatus::NullPointer;
    }
    MpeStatus::Ok
}

/// Model time, or NaN for a null handle.
///
/// # Safety
/// `h` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mpe_model_time(h: *const MpeModel) -> f64 {
    h.as_ref().map_or(f64::NAN, |m| m.state.time)
}

/// Interior grid sizes.
///
/// # Safety
/// `h` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpe_model_dims(h: *const MpeModel, nx: *mut usize, ny: *mut usize, np: *mut usize) -> MpeStatus {
    guard(|| {
        let m = model_ref(h)?;
        if nx.is_null() || ny.is_null() || np.is_null() {
            return Err(null());
        }
        *nx = m.model.grid.nx;
        *ny = m.model.grid.ny;
        *np = m.model.grid.np;
        Ok(())
    })
}

fn field_values(m: &MpeModel, field: MpeField) -> Vec<f64> {
    let g = &m.model.grid;
    let s = &m.state;
    let scalar = match field {
        MpeField::V1 => &s.vel.v1,
        MpeField::V2 => &s.vel.v2,
        MpeField::T => &s.t,
        MpeField::Qv => &s.qv,
        MpeField::Qc => &s.qc,
        MpeField::Qr => &s.qr,
        MpeField::Phi => &s.phi,
        MpeField::W => {
            let mut out = Vec::with_capacity(g.nx * g.ny * (g.np + 1));
            for kf in 0..=g.np {
                for j in 0..g.ny {
                    for i in 0..g.nx {
                        out.push(s.vel.w.get(i, j, kf));
                    }
                }
            }
            return out;
        }
        MpeField::PhiS => {
            let mut out = Vec::with_capacity(g.nx * g.ny);
            for j in 0..g.ny as isize {
                for i in 0..g.nx as isize {
                    out.push(s.phi_s.get(i, j));
                }
            }
            return out;
        }
    };
    scalar.interior().collect()
}

/// Number of values [`mpe_model_copy_field`] writes for `field`, or 0 for a
/// null handle.
///
/// # Safety
/// `h` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mpe_field_len(h: *const MpeModel, field: MpeField) -> usize {
    let Some(m) = h.as_ref() else { return 0 };
    let g = &m.model.grid;
    match field {
        MpeField::W => g.nx * g.ny * (g.np + 1),
        MpeField::PhiS => g.nx * g.ny,
        _ => g.nx * g.ny * g.np,
    }
}

/// Copies a field into `buf` (capacity `len` values).
///
/// # Safety
/// `h` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mpe_model_copy_field(h: *const MpeModel, field: MpeField, buf: *mut f64, len: usize) -> MpeStatus {
    guard(|| {
        let m = model_ref(h)?;
        if buf.is_null() {
            return Err(null());
        }
        let need = mpe_field_len(h, field);
        if len < need {
            return Err((MpeStatus::BufferTooSmall, format!("buffer holds {len} values, need {need}")));
        }
        let vals = field_values(m, field);
        ptr::copy_nonoverlapping(vals.as_ptr(), buf, vals.len());
        Ok(())
    })
}

/// Fills `out` with the diagnostics of the current state.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpe_model_diagnostics(h: *const MpeModel, out: *mut MpeDiagnostics) -> MpeStatus {
    guard(|| {
        let m = model_ref(h)?;
        let out = out.as_mut().ok_or_else(null)?;
        let r = record(&m.model, &m.state, &m.limits, m.last_dt);
        let mut flags = 0;
        for (set, bit) in [
            (r.flag_qv, MPE_FLAG_QV),
            (r.flag_qc, MPE_FLAG_QC),
            (r.flag_qr, MPE_FLAG_QR),
            (r.flag_t, MPE_FLAG_T),
        ] {
            if set {
                flags |= bit;
            }
        }
        *out = MpeDiagnostics {
            time: r.time,
            step: r.step as u64,
            v_l2: r.v.l2,
            v_h1: r.v.h1,
            t_l2: r.t.l2,
            t_min: r.t.min,
            t_max: r.t.max,
            qv_min: r.qv.min,
            qv_max: r.qv.max,
            qc_min: r.qc.min,
            qc_max: r.qc.max,
            qr_min: r.qr.min,
            qr_max: r.qr.max,
            continuity_residual: r.continuity_residual,
            w_top: r.w_top,
            div_top: r.div_top,
            dn_v_lateral: r.dn_v_lateral,
            projection_residual: r.projection_residual,
            projection_iterations: r.projection_iterations as u64,
            bound_flags: flags,
        };
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length in bytes (without the terminator).
///
/// # Safety
/// `buf` must hold `len` bytes, or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn mpe_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Library version, static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mpe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
