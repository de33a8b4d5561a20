//! C ABI for the nvgmi simulator.
//!
//! The surface follows the usual opaque-handle / error-code pattern: every
//! fallible call returns an `nvgmi_status` code and leaves a human-readable
//! message in thread-local storage (`nvgmi_last_error_message`). Handles are
//! created and destroyed only through this API. The shipped header lives at
//! `include/nvgmi.h` and is maintained by hand in lockstep with this file.

use nvgmi::config::{parse_config, ExperimentConfig, ExperimentKind};
use nvgmi::error::Error;
use nvgmi::estimation;
use nvgmi::experiment::{run_experiment, OutputFormat};
use nvgmi::gmi::{self, GmiWire};
use nvgmi::presets;
use nvgmi::spin::{self, NvParams};
use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Status codes mirrored in include/nvgmi.h.
pub const NVGMI_OK: c_int = 0;
pub const NVGMI_ERR_MODEL: c_int = 1;
pub const NVGMI_ERR_CONFIG: c_int = 2;
pub const NVGMI_ERR_NULL: c_int = 3;
pub const NVGMI_ERR_UTF8: c_int = 4;
pub const NVGMI_ERR_PANIC: c_int = 5;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> c_int {
    match err.exit_code() {
        2 => NVGMI_ERR_CONFIG,
        _ => NVGMI_ERR_MODEL,
    }
}

fn guard<F: FnOnce() -> c_int>(body: F) -> c_int {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            NVGMI_ERR_PANIC
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        set_error("null pointer argument");
        return Err(NVGMI_ERR_NULL);
    }
    // SAFETY: caller guarantees a NUL-terminated string per the header contract
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(s),
        Err(_) => {
            set_error("argument is not valid UTF-8");
            Err(NVGMI_ERR_UTF8)
        }
    }
}

/// Message describing the most recent error on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nvgmi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static library version string.
#[no_mangle]
pub extern "C" fn nvgmi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------------------
// stateless physics helpers
// ---------------------------------------------------------------------------

/// Four ODMR transition frequencies (Hz, ascending) for the default NV
/// parameter set at the given axis-projected field (Tesla). `out` must hold
/// four doubles.
///
/// # Safety
/// `out` must point to at least 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_transition_frequencies(
    b_parallel: c_double,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return NVGMI_ERR_NULL;
        }
        let params = NvParams::default();
        match spin::transition_frequencies(&params, b_parallel) {
            Ok(freqs) => {
                // SAFETY: caller provides 4 doubles
                unsafe { ptr::copy_nonoverlapping(freqs.as_ptr(), out, 4) };
                NVGMI_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Skin depth sqrt(2 rho / (omega mu_r mu_0)) in meters.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_skin_depth(
    f_ac: c_double,
    mu_r: c_double,
    rho: c_double,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return NVGMI_ERR_NULL;
        }
        match gmi::skin_depth(f_ac, mu_r, rho) {
            Ok(d) => {
                unsafe { *out = d };
                NVGMI_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Photon-shot-noise DC field figure h * fwhm / (g mu_B), Tesla.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_shot_noise_dc_sensitivity(
    fwhm_hz: c_double,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return NVGMI_ERR_NULL;
        }
        match estimation::shot_noise_dc_sensitivity(fwhm_hz) {
            Ok(v) => {
                unsafe { *out = v };
                NVGMI_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Field per half fringe 1 / (2 tau gamma_e), Tesla.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_delta_b_per_fringe_half(
    two_tau_s: c_double,
    gyro_e_hz_per_t: c_double,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return NVGMI_ERR_NULL;
        }
        match estimation::delta_b_per_fringe_half(two_tau_s, gyro_e_hz_per_t) {
            Ok(v) => {
                unsafe { *out = v };
                NVGMI_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

// ---------------------------------------------------------------------------
// opaque wire handle
// ---------------------------------------------------------------------------

/// Opaque wire model handle.
pub struct NvgmiWire {
    inner: GmiWire,
}

/// Create a wire from a preset name ("paper-wire", "pristine", "plated",
/// "plated+annealed"). Free with `nvgmi_wire_free`.
///
/// # Safety
/// `preset` must be a NUL-terminated string; `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_wire_from_preset(
    preset: *const c_char,
    out: *mut *mut NvgmiWire,
) -> c_int {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return NVGMI_ERR_NULL;
        }
        let name = match unsafe { cstr(preset) } {
            Ok(s) => s,
            Err(code) => return code,
        };
        match presets::wire_params(name) {
            Ok(inner) => {
                let handle = Box::new(NvgmiWire { inner });
                unsafe { *out = Box::into_raw(handle) };
                NVGMI_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// # Safety
/// `wire` must be a pointer returned by `nvgmi_wire_from_preset`, not yet
/// freed. Passing null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_wire_free(wire: *mut NvgmiWire) {
    if !wire.is_null() {
        // SAFETY: ownership returns to Rust exactly once
        drop(unsafe { Box::from_raw(wire) });
    }
}

unsafe fn wire_ref<'a>(wire: *const NvgmiWire) -> Result<&'a GmiWire, c_int> {
    if wire.is_null() {
        set_error("null wire handle");
        return Err(NVGMI_ERR_NULL);
    }
    Ok(unsafe { &(*wire).inner })
}

/// Complex impedance at (f_ac, h_dc); writes the real and imaginary parts.
///
/// # Safety
/// `wire` must be a live handle; `out_re` and `out_im` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_wire_impedance(
    wire: *const NvgmiWire,
    f_ac: c_double,
    h_dc: c_double,
    out_re: *mut c_double,
    out_im: *mut c_double,
) -> c_int {
    guard(|| {
        if out_re.is_null() || out_im.is_null() {
            set_error("null output pointer");
            return NVGMI_ERR_NULL;
        }
        let w = match unsafe { wire_ref(wire) } {
            Ok(w) => w,
            Err(code) => return code,
        };
        match gmi::impedance(w, f_ac, h_dc) {
            Ok(z) => {
                unsafe {
                    *out_re = z.re;
                    *out_im = z.im;
                }
                NVGMI_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// GMI ratio in percent at (f_ac, h_dc).
///
/// # Safety
/// `wire` must be a live handle; `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_wire_gmi_ratio(
    wire: *const NvgmiWire,
    f_ac: c_double,
    h_dc: c_double,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return NVGMI_ERR_NULL;
        }
        let w = match unsafe { wire_ref(wire) } {
            Ok(w) => w,
            Err(code) => return code,
        };
        match gmi::gmi_ratio(w, f_ac, h_dc) {
            Ok(r) => {
                unsafe { *out = r };
                NVGMI_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// AC field amplitude at the NV (Tesla) for a drive `v_ac` at `f_ac` under
/// external field `b_dc`.
///
/// # Safety
/// `wire` must be a live handle; `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_wire_ac_field_at_nv(
    wire: *const NvgmiWire,
    v_ac: c_double,
    f_ac: c_double,
    b_dc: c_double,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return NVGMI_ERR_NULL;
        }
        let w = match unsafe { wire_ref(wire) } {
            Ok(w) => w,
            Err(code) => return code,
        };
        match gmi::ac_field_at_nv(w, v_ac, f_ac, b_dc) {
            Ok(b) => {
                unsafe { *out = b };
                NVGMI_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Intrinsic thermal-magnetization noise amplitude, T/sqrt(Hz), with the
/// default material noise parameters.
///
/// # Safety
/// `wire` must be a live handle; `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_wire_intrinsic_noise(
    wire: *const NvgmiWire,
    out: *mut c_double,
) -> c_int {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return NVGMI_ERR_NULL;
        }
        let w = match unsafe { wire_ref(wire) } {
            Ok(w) => w,
            Err(code) => return code,
        };
        match gmi::intrinsic_noise(w, &presets::noise_params()) {
            Ok(eta) => {
                unsafe { *out = eta };
                NVGMI_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

// ---------------------------------------------------------------------------
// opaque experiment handle
// ---------------------------------------------------------------------------

/// Opaque experiment configuration handle.
pub struct NvgmiExperiment {
    config: ExperimentConfig,
    config_text: String,
}

/// Parse a TOML experiment config. `kind` is the experiment name (same
/// vocabulary as the CLI subcommands). Free with `nvgmi_experiment_free`.
///
/// # Safety
/// `kind` and `config_toml` must be NUL-terminated strings; `out` a writable
/// pointer slot.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_experiment_new(
    kind: *const c_char,
    config_toml: *const c_char,
    out: *mut *mut NvgmiExperiment,
) -> c_int {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return NVGMI_ERR_NULL;
        }
        let kind_name = match unsafe { cstr(kind) } {
            Ok(s) => s,
            Err(code) => return code,
        };
        let text = match unsafe { cstr(config_toml) } {
            Ok(s) => s,
            Err(code) => return code,
        };
        let kind = match ExperimentKind::from_name(kind_name) {
            Ok(k) => k,
            Err(e) => {
                set_error(&e.to_string());
                return status_of(&e);
            }
        };
        match parse_config(text, Some(kind), None) {
            Ok(config) => {
                let handle = Box::new(NvgmiExperiment {
                    config,
                    config_text: text.to_string(),
                });
                unsafe { *out = Box::into_raw(handle) };
                NVGMI_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// # Safety
/// `experiment` must be a pointer returned by `nvgmi_experiment_new`, not yet
/// freed. Passing null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_experiment_free(experiment: *mut NvgmiExperiment) {
    if !experiment.is_null() {
        drop(unsafe { Box::from_raw(experiment) });
    }
}

/// Run the experiment, writing trace/report/manifest files to `out_dir`.
/// `use_json` selects JSON for auxiliary data files (traces stay CSV).
///
/// # Safety
/// `experiment` must be a live handle; `out_dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn nvgmi_experiment_run(
    experiment: *const NvgmiExperiment,
    out_dir: *const c_char,
    use_json: c_int,
) -> c_int {
    guard(|| {
        if experiment.is_null() {
            set_error("null experiment handle");
            return NVGMI_ERR_NULL;
        }
        let dir = match unsafe { cstr(out_dir) } {
            Ok(s) => s,
            Err(code) => return code,
        };
        let exp = unsafe { &*experiment };
        let format = if use_json != 0 {
            OutputFormat::Json
        } else {
            OutputFormat::Csv
        };
        match run_experiment(&exp.config, &exp.config_text, Path::new(dir), format) {
            Ok(_) => NVGMI_OK,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}
