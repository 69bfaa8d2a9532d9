//! C ABI over the `vfa` core.
//!
//! Results come back through out-pointers; every function returns a
//! [`VfaStatus`]. On failure, [`vfa_last_error_message`] describes the error
//! for the calling thread. Handles are opaque and must be released with
//! their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vfa::channel_fit::{fit_channel_with, ChannelFit, ChannelTarget};
use vfa::psychometrics::{Censoring, ThresholdPoint};
use vfa::spectral_noise::{synthesize_noise, FrequencyBand, NoiseField, NoiseSpec};
use vfa::{Error, ErrorKind};

/// Status codes. Config, data and numerical failures share their values
/// with the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfaStatus {
    Ok = 0,
    ConfigError = 2,
    DataError = 3,
    NumericalError = 4,
    NullPointer = 10,
    Panic = 11,
}

/// Channel-fit target selector for [`vfa_fit_channel`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfaChannelTarget {
    Sensitivity = 0,
    LogSensitivity = 1,
}

/// Opaque noise field (row-major, `width * height` doubles).
pub struct VfaNoiseField(NoiseField);

/// Opaque channel-fit result.
pub struct VfaChannelFit(ChannelFit);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(e: Error) -> VfaStatus {
    let status = match e.kind() {
        ErrorKind::Config => VfaStatus::ConfigError,
        ErrorKind::Data => VfaStatus::DataError,
        ErrorKind::Numerical => VfaStatus::NumericalError,
    };
    set_error(e.to_string());
    status
}

fn null(what: &str) -> VfaStatus {
    set_error(format!("{what} is null"));
    VfaStatus::NullPointer
}

fn guard(f: impl FnOnce() -> VfaStatus) -> VfaStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            VfaStatus::Panic
        }
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn vfa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vfa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Band-limited Gaussian noise with exact population SD `target_sd`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn vfa_synthesize_noise(
    center_freq: f64,
    width_octaves: f64,
    transition_octaves: f64,
    target_sd: f64,
    seed: u64,
    width: usize,
    height: usize,
    out: *mut *mut VfaNoiseField,
) -> VfaStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let spec = NoiseSpec {
            band: FrequencyBand::new(center_freq, width_octaves, transition_octaves),
            target_sd,
            seed,
        };
        match synthesize_noise(&spec, width, height) {
            Ok(field) => {
                *out = Box::into_raw(Box::new(VfaNoiseField(field)));
                VfaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `field` must be null or a handle from [`vfa_synthesize_noise`].
#[no_mangle]
pub unsafe extern "C" fn vfa_noise_field_width(field: *const VfaNoiseField) -> usize {
    field.as_ref().map_or(0, |f| f.0.width)
}

/// # Safety
/// `field` must be null or a handle from [`vfa_synthesize_noise`].
#[no_mangle]
pub unsafe extern "C" fn vfa_noise_field_height(field: *const VfaNoiseField) -> usize {
    field.as_ref().map_or(0, |f| f.0.height)
}

/// Number of values, `width * height`.
///
/// # Safety
/// `field` must be null or a handle from [`vfa_synthesize_noise`].
#[no_mangle]
pub unsafe extern "C" fn vfa_noise_field_len(field: *const VfaNoiseField) -> usize {
    field.as_ref().map_or(0, |f| f.0.values.len())
}

/// Row-major values, owned by the handle.
///
/// # Safety
/// `field` must be null or a handle from [`vfa_synthesize_noise`].
#[no_mangle]
pub unsafe extern "C" fn vfa_noise_field_data(field: *const VfaNoiseField) -> *const f64 {
    field.as_ref().map_or(ptr::null(), |f| f.0.values.as_ptr())
}

/// # Safety
/// `field` must be null or a handle from [`vfa_synthesize_noise`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn vfa_noise_field_free(field: *mut VfaNoiseField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Fit a Gaussian channel to per-band thresholds. A NaN threshold marks a
/// censored band, which is excluded.
///
/// # Safety
/// `center_freqs` and `threshold_sds` must point to `n` doubles; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn vfa_fit_channel(
    center_freqs: *const f64,
    threshold_sds: *const f64,
    n: usize,
    target: VfaChannelTarget,
    out: *mut *mut VfaChannelFit,
) -> VfaStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        if n > 0 && (center_freqs.is_null() || threshold_sds.is_null()) {
            return null("input array");
        }
        let (freqs, thresholds) = if n == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(center_freqs, n), std::slice::from_raw_parts(threshold_sds, n))
        };
        let points: Vec<ThresholdPoint> = freqs
            .iter()
            .zip(thresholds)
            .enumerate()
            .map(|(i, (&f, &t))| ThresholdPoint {
                band_index: i,
                band: FrequencyBand::new(f, 1.0, 0.0),
                threshold_sd: (!t.is_nan()).then_some(t),
                baseline_accuracy: f64::NAN,
                censoring: if t.is_nan() { Censoring::NeverDrops } else { Censoring::Measured },
                extrapolated_sd: None,
            })
            .collect();
        if let Some(p) = points.iter().find(|p| p.threshold_sd.is_some_and(|t| !(t > 0.0 && t.is_finite()))) {
            return fail(Error::Data(format!("band {}: threshold must be positive and finite", p.band_index)));
        }
        let target = match target {
            VfaChannelTarget::Sensitivity => ChannelTarget::Sensitivity,
            VfaChannelTarget::LogSensitivity => ChannelTarget::LogSensitivity,
        };
        match fit_channel_with(&points, target) {
            Ok(fit) => {
                *out = Box::into_raw(Box::new(VfaChannelFit(fit)));
                VfaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Full width at half maximum of the fitted channel, in octaves.
///
/// # Safety
/// `fit` must be null or a handle from [`vfa_fit_channel`].
#[no_mangle]
pub unsafe extern "C" fn vfa_channel_fit_bandwidth(fit: *const VfaChannelFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.bandwidth_octaves)
}

/// # Safety
/// `fit` must be null or a handle from [`vfa_fit_channel`].
#[no_mangle]
pub unsafe extern "C" fn vfa_channel_fit_peak_log2_freq(fit: *const VfaChannelFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.peak_log2_freq)
}

/// # Safety
/// `fit` must be null or a handle from [`vfa_fit_channel`].
#[no_mangle]
pub unsafe extern "C" fn vfa_channel_fit_sigma(fit: *const VfaChannelFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.sigma_octaves)
}

/// # Safety
/// `fit` must be null or a handle from [`vfa_fit_channel`].
#[no_mangle]
pub unsafe extern "C" fn vfa_channel_fit_peak_sensitivity(fit: *const VfaChannelFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.peak_sensitivity)
}

/// Number of bands used by the fit.
///
/// # Safety
/// `fit` must be null or a handle from [`vfa_fit_channel`].
#[no_mangle]
pub unsafe extern "C" fn vfa_channel_fit_n_points(fit: *const VfaChannelFit) -> usize {
    fit.as_ref().map_or(0, |f| f.0.n_points)
}

/// # Safety
/// `fit` must be null or an unfreed handle from [`vfa_fit_channel`].
#[no_mangle]
pub unsafe extern "C" fn vfa_channel_fit_free(fit: *mut VfaChannelFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// FWHM in octaves for a Gaussian of the given σ (octaves).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vfa_bandwidth_from_sigma(sigma_octaves: f64, out: *mut f64) -> VfaStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match vfa::bandwidth_from_sigma(sigma_octaves) {
            Ok(bw) => {
                *out = bw;
                VfaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Shape decisions over shape-plus-texture decisions.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vfa_shape_bias(n_shape: usize, n_texture: usize, out: *mut f64) -> VfaStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        if n_shape + n_texture == 0 {
            return fail(Error::Data("shape bias undefined: no cue-consistent responses".into()));
        }
        *out = n_shape as f64 / (n_shape + n_texture) as f64;
        VfaStatus::Ok
    })
}
