//! C ABI over `coherence-nulltest`.
//!
//! Objects are opaque heap handles released with the matching `*_free`.
//! Every fallible call returns a status code; the message of the last
//! failure on the calling thread is available from
//! [`cn_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coherence_nulltest::correlator_engine::{estimate_covariance, Observable};
use coherence_nulltest::experiment_cli::{run_experiment, ExperimentConfig, Status};
use coherence_nulltest::field_states::{
    make_coherent, make_fock, make_squeezed, make_thermal, CutoffPolicy, FieldState,
};
use coherence_nulltest::joint_evolution::{
    evolve, CouplingParams, EvolutionMode, JointDetectorState,
};
use coherence_nulltest::measurement_channels::{
    click_pmf, homodyne_pdf, sample_clicks, sample_heterodyne, sample_homodyne, GridSpec,
    SampleBatch,
};
use coherence_nulltest::physical_params::{gamma0_rate, DetectorSpec};
use coherence_nulltest::{Error, ErrorKind};
use num_complex::Complex64;

pub const CN_OK: i32 = 0;
pub const CN_ERR_NULL_POINTER: i32 = 1;
pub const CN_ERR_CONFIG: i32 = 2;
pub const CN_ERR_NUMERICAL: i32 = 3;
pub const CN_ERR_IO: i32 = 4;
/// The run finished but at least one channel failed.
pub const CN_ERR_PARTIAL: i32 = 5;
pub const CN_ERR_BUFFER_TOO_SMALL: i32 = 6;
pub const CN_ERR_PANIC: i32 = 7;

pub const CN_MODE_EXACT: i32 = 0;
pub const CN_MODE_SEQUENTIAL: i32 = 1;
pub const CN_MODE_APPROXIMATE: i32 = 2;

pub const CN_CHANNEL_CLICK: i32 = 0;
pub const CN_CHANNEL_HOMODYNE: i32 = 1;
pub const CN_CHANNEL_HETERODYNE: i32 = 2;

pub const CN_OBS_CLICK_PRODUCT: i32 = 0;
pub const CN_OBS_QUADRATURE_PRODUCT: i32 = 1;
pub const CN_OBS_HETERODYNE_RE: i32 = 2;
pub const CN_OBS_HETERODYNE_CROSS: i32 = 3;

/// Truncated field density matrix.
pub struct CnFieldState(FieldState);

/// Two-detector state after the interaction window.
pub struct CnJointState(JointDetectorState);

/// Sampled joint outcomes of one channel.
pub struct CnSampleBatch(SampleBatch);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code_for(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config => CN_ERR_CONFIG,
        ErrorKind::Numerical => CN_ERR_NUMERICAL,
        ErrorKind::Io => CN_ERR_IO,
    }
}

fn guard(f: impl FnOnce() -> Result<(), i32>) -> i32 {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CN_OK,
        Ok(Err(code)) => code,
        Err(_) => {
            set_error("internal panic".into());
            CN_ERR_PANIC
        }
    }
}

fn check<T>(r: coherence_nulltest::Result<T>) -> Result<T, i32> {
    r.map_err(|e| {
        set_error(e.to_string());
        code_for(&e)
    })
}

fn config_error(msg: impl Into<String>) -> i32 {
    set_error(msg.into());
    CN_ERR_CONFIG
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, i32> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle".into());
        CN_ERR_NULL_POINTER
    })
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), i32> {
    if out.is_null() {
        set_error("null output pointer".into());
        return Err(CN_ERR_NULL_POINTER);
    }
    out.write(v);
    Ok(())
}

unsafe fn put_state(
    out: *mut *mut CnFieldState,
    s: coherence_nulltest::Result<FieldState>,
) -> Result<(), i32> {
    if out.is_null() {
        return write_out(out, ptr::null_mut());
    }
    let s = check(s)?;
    write_out(out, Box::into_raw(Box::new(CnFieldState(s))))
}

/// Copies the last error message of this thread into `buf`, NUL terminated.
/// Returns the message length without the terminator, or -1 when `buf` is too
/// small; an empty string is written when there is no error.
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn cn_last_error_message(buf: *mut c_char, len: usize) -> i32 {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map(|c| c.as_bytes()).unwrap_or(b"");
        if buf.is_null() || len < bytes.len() + 1 {
            return -1;
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
        *buf.add(bytes.len()) = 0;
        bytes.len() as i32
    })
}

/// Coherent state with amplitude `alpha_re + i alpha_im` at default cutoff.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn cn_state_coherent(
    alpha_re: f64,
    alpha_im: f64,
    out: *mut *mut CnFieldState,
) -> i32 {
    guard(|| {
        put_state(
            out,
            make_coherent(Complex64::new(alpha_re, alpha_im), CutoffPolicy::default()),
        )
    })
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn cn_state_fock(n: usize, out: *mut *mut CnFieldState) -> i32 {
    guard(|| put_state(out, make_fock(n, CutoffPolicy::default())))
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn cn_state_thermal(nbar: f64, out: *mut *mut CnFieldState) -> i32 {
    guard(|| put_state(out, make_thermal(nbar, CutoffPolicy::default())))
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn cn_state_squeezed(
    r: f64,
    phi: f64,
    displacement_re: f64,
    displacement_im: f64,
    out: *mut *mut CnFieldState,
) -> i32 {
    guard(|| {
        let d = Complex64::new(displacement_re, displacement_im);
        put_state(out, make_squeezed(r, phi, d, CutoffPolicy::default()))
    })
}

/// Retained Fock dimension and the probability mass outside it.
///
/// # Safety
/// `state` must be a live handle; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cn_state_info(
    state: *const CnFieldState,
    dim: *mut usize,
    tail_mass: *mut f64,
) -> i32 {
    guard(|| {
        let s = &deref(state)?.0;
        write_out(dim, s.dim())?;
        write_out(tail_mass, s.tail_mass())
    })
}

/// # Safety
/// `state` must be null or a handle from a `cn_state_*` constructor that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn cn_state_free(state: *mut CnFieldState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Evolves `state` through one window of coupling `gamma0_dt` with one of the
/// `CN_MODE_*` paths.
///
/// # Safety
/// `state` must be a live handle and `out` a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn cn_evolve(
    state: *const CnFieldState,
    gamma0_dt: f64,
    mode: i32,
    out: *mut *mut CnJointState,
) -> i32 {
    guard(|| {
        let s = &deref(state)?.0;
        let mode = match mode {
            CN_MODE_EXACT => EvolutionMode::Exact,
            CN_MODE_SEQUENTIAL => EvolutionMode::Sequential,
            CN_MODE_APPROXIMATE => EvolutionMode::Approximate,
            m => return Err(config_error(format!("unknown mode {m}"))),
        };
        let cp = check(CouplingParams::new(gamma0_dt, mode))?;
        let js = check(evolve(s, &cp))?;
        write_out(out, Box::into_raw(Box::new(CnJointState(js))))
    })
}

/// Mean detector occupations.
///
/// # Safety
/// `js` must be a live handle; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cn_joint_detector_means(
    js: *const CnJointState,
    n1: *mut f64,
    n2: *mut f64,
) -> i32 {
    guard(|| {
        let (a, b) = deref(js)?.0.detector_means();
        write_out(n1, a)?;
        write_out(n2, b)
    })
}

/// Joint click probability `P(n1, n2)`; zero beyond the detector cutoff.
///
/// # Safety
/// `js` must be a live handle and `p` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_joint_click_probability(
    js: *const CnJointState,
    n1: usize,
    n2: usize,
    p: *mut f64,
) -> i32 {
    guard(|| {
        let pmf = click_pmf(&deref(js)?.0);
        write_out(p, pmf.get(n1, n2))
    })
}

/// # Safety
/// `js` must be null or a live handle from [`cn_evolve`].
#[no_mangle]
pub unsafe extern "C" fn cn_joint_free(js: *mut CnJointState) {
    if !js.is_null() {
        drop(Box::from_raw(js));
    }
}

/// Draws `count` joint outcomes of a `CN_CHANNEL_*` channel. Homodyne uses
/// the default automatic grid.
///
/// # Safety
/// `js` must be a live handle and `out` a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn cn_sample(
    js: *const CnJointState,
    channel: i32,
    count: usize,
    seed: u64,
    out: *mut *mut CnSampleBatch,
) -> i32 {
    guard(|| {
        let js = &deref(js)?.0;
        let batch = match channel {
            CN_CHANNEL_CLICK => check(sample_clicks(&click_pmf(js), count, seed))?,
            CN_CHANNEL_HOMODYNE => {
                let pdf = check(homodyne_pdf(js, &GridSpec::default()))?;
                check(sample_homodyne(&pdf, count, seed))?
            }
            CN_CHANNEL_HETERODYNE => check(sample_heterodyne(js, count, seed))?,
            c => return Err(config_error(format!("unknown channel {c}"))),
        };
        write_out(out, Box::into_raw(Box::new(CnSampleBatch(batch))))
    })
}

/// Number of outcomes in the batch.
///
/// # Safety
/// `batch` must be a live handle and `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_batch_len(batch: *const CnSampleBatch, len: *mut usize) -> i32 {
    guard(|| write_out(len, deref(batch)?.0.count()))
}

/// Copies the real outcome columns (counts, quadratures or `Re beta`) into
/// `out1` and `out2`, each of capacity `cap`.
///
/// # Safety
/// `batch` must be a live handle; `out1` and `out2` must each point to `cap`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cn_batch_real_columns(
    batch: *const CnSampleBatch,
    out1: *mut f64,
    out2: *mut f64,
    cap: usize,
) -> i32 {
    guard(|| {
        let b = &deref(batch)?.0;
        if out1.is_null() || out2.is_null() {
            set_error("null output pointer".into());
            return Err(CN_ERR_NULL_POINTER);
        }
        if cap < b.count() {
            set_error(format!("capacity {cap} below batch length {}", b.count()));
            return Err(CN_ERR_BUFFER_TOO_SMALL);
        }
        let (x1, x2) = b.real_columns();
        ptr::copy_nonoverlapping(x1.as_ptr(), out1, x1.len());
        ptr::copy_nonoverlapping(x2.as_ptr(), out2, x2.len());
        Ok(())
    })
}

/// Sample covariance of a `CN_OBS_*` observable with its standard error.
/// `value_im` is zero for real observables.
///
/// # Safety
/// `batch` must be a live handle; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cn_batch_covariance(
    batch: *const CnSampleBatch,
    observable: i32,
    value_re: *mut f64,
    value_im: *mut f64,
    standard_error: *mut f64,
) -> i32 {
    guard(|| {
        let b = &deref(batch)?.0;
        let obs = match observable {
            CN_OBS_CLICK_PRODUCT => Observable::ClickProduct,
            CN_OBS_QUADRATURE_PRODUCT => Observable::QuadratureProduct,
            CN_OBS_HETERODYNE_RE => Observable::HeterodyneRe,
            CN_OBS_HETERODYNE_CROSS => Observable::HeterodyneCross,
            o => return Err(config_error(format!("unknown observable {o}"))),
        };
        let (v, se) = check(estimate_covariance(b, obs))?;
        let z = v.as_complex();
        write_out(value_re, z.re)?;
        write_out(value_im, z.im)?;
        write_out(standard_error, se)
    })
}

/// # Safety
/// `batch` must be null or a live handle from [`cn_sample`].
#[no_mangle]
pub unsafe extern "C" fn cn_batch_free(batch: *mut CnSampleBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// Coupling rate in 1/s for SI detector parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cn_gamma0(
    mass: f64,
    length: f64,
    omega: f64,
    speed: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let spec = DetectorSpec {
            mass,
            length,
            omega,
            speed,
            dt: 1.0,
        };
        write_out(out, check(gamma0_rate(&spec))?)
    })
}

/// Runs a full experiment from a JSON configuration, writing its outputs to
/// the configured directory. Returns `CN_ERR_PARTIAL` if any channel failed.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cn_run_config_json(config_json: *const c_char) -> i32 {
    guard(|| {
        if config_json.is_null() {
            set_error("null config".into());
            return Err(CN_ERR_NULL_POINTER);
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| config_error(format!("config is not UTF-8: {e}")))?;
        let cfg = check(ExperimentConfig::from_json(text))?;
        let report = check(run_experiment(&cfg))?;
        if report.status == Status::Partial {
            let failed: Vec<&str> = report
                .channels
                .iter()
                .filter(|c| c.status == Status::Failed)
                .map(|c| c.channel.as_str())
                .collect();
            set_error(format!("failed channels: {}", failed.join(",")));
            return Err(CN_ERR_PARTIAL);
        }
        Ok(())
    })
}
