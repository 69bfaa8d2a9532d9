#ifndef VFA_H
#define VFA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Channel-fit target selector for [`vfa_fit_channel`].
typedef enum VfaChannelTarget {
  VFA_CHANNEL_TARGET_SENSITIVITY = 0,
  VFA_CHANNEL_TARGET_LOG_SENSITIVITY = 1,
} VfaChannelTarget;

// Status codes. Config, data and numerical failures share their values
// with the CLI exit codes.
typedef enum VfaStatus {
  VFA_STATUS_OK = 0,
  VFA_STATUS_CONFIG_ERROR = 2,
  VFA_STATUS_DATA_ERROR = 3,
  VFA_STATUS_NUMERICAL_ERROR = 4,
  VFA_STATUS_NULL_POINTER = 10,
  VFA_STATUS_PANIC = 11,
} VfaStatus;

// Opaque channel-fit result.
typedef struct VfaChannelFit VfaChannelFit;

// Opaque noise field (row-major, `width * height` doubles).
typedef struct VfaNoiseField VfaNoiseField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library from the same thread.
const char *vfa_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *vfa_version(void);

// Band-limited Gaussian noise with exact population SD `target_sd`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum VfaStatus vfa_synthesize_noise(double center_freq,
                                    double width_octaves,
                                    double transition_octaves,
                                    double target_sd,
                                    uint64_t seed,
                                    uintptr_t width,
                                    uintptr_t height,
                                    struct VfaNoiseField **out);

// # Safety
// `field` must be null or a handle from [`vfa_synthesize_noise`].
uintptr_t vfa_noise_field_width(const struct VfaNoiseField *field);

// # Safety
// `field` must be null or a handle from [`vfa_synthesize_noise`].
uintptr_t vfa_noise_field_height(const struct VfaNoiseField *field);

// Number of values, `width * height`.
//
// # Safety
// `field` must be null or a handle from [`vfa_synthesize_noise`].
uintptr_t vfa_noise_field_len(const struct VfaNoiseField *field);

// Row-major values, owned by the handle.
//
// # Safety
// `field` must be null or a handle from [`vfa_synthesize_noise`].
const double *vfa_noise_field_data(const struct VfaNoiseField *field);

// # Safety
// `field` must be null or a handle from [`vfa_synthesize_noise`] that has
// not been freed.
void vfa_noise_field_free(struct VfaNoiseField *field);

// Fit a Gaussian channel to per-band thresholds. A NaN threshold marks a
// censored band, which is excluded.
//
// # Safety
// `center_freqs` and `threshold_sds` must point to `n` doubles; `out` must
// be writable.
enum VfaStatus vfa_fit_channel(const double *center_freqs,
                               const double *threshold_sds,
                               uintptr_t n,
                               enum VfaChannelTarget target,
                               struct VfaChannelFit **out);

// Full width at half maximum of the fitted channel, in octaves.
//
// # Safety
// `fit` must be null or a handle from [`vfa_fit_channel`].
double vfa_channel_fit_bandwidth(const struct VfaChannelFit *fit);

// # Safety
// `fit` must be null or a handle from [`vfa_fit_channel`].
double vfa_channel_fit_peak_log2_freq(const struct VfaChannelFit *fit);

// # Safety
// `fit` must be null or a handle from [`vfa_fit_channel`].
double vfa_channel_fit_sigma(const struct VfaChannelFit *fit);

// # Safety
// `fit` must be null or a handle from [`vfa_fit_channel`].
double vfa_channel_fit_peak_sensitivity(const struct VfaChannelFit *fit);

// Number of bands used by the fit.
//
// # Safety
// `fit` must be null or a handle from [`vfa_fit_channel`].
uintptr_t vfa_channel_fit_n_points(const struct VfaChannelFit *fit);

// # Safety
// `fit` must be null or an unfreed handle from [`vfa_fit_channel`].
void vfa_channel_fit_free(struct VfaChannelFit *fit);

// FWHM in octaves for a Gaussian of the given σ (octaves).
//
// # Safety
// `out` must be writable.
enum VfaStatus vfa_bandwidth_from_sigma(double sigma_octaves, double *out);

// Shape decisions over shape-plus-texture decisions.
//
// # Safety
// `out` must be writable.
enum VfaStatus vfa_shape_bias(uintptr_t n_shape, uintptr_t n_texture, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VFA_H */
