#ifndef COHERENCE_NULLTEST_H
#define COHERENCE_NULLTEST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define CN_OK 0

#define CN_ERR_NULL_POINTER 1

#define CN_ERR_CONFIG 2

#define CN_ERR_NUMERICAL 3

#define CN_ERR_IO 4

/**
 * The run finished but at least one channel failed.
 */
#define CN_ERR_PARTIAL 5

#define CN_ERR_BUFFER_TOO_SMALL 6

#define CN_ERR_PANIC 7

#define CN_MODE_EXACT 0

#define CN_MODE_SEQUENTIAL 1

#define CN_MODE_APPROXIMATE 2

#define CN_CHANNEL_CLICK 0

#define CN_CHANNEL_HOMODYNE 1

#define CN_CHANNEL_HETERODYNE 2

#define CN_OBS_CLICK_PRODUCT 0

#define CN_OBS_QUADRATURE_PRODUCT 1

#define CN_OBS_HETERODYNE_RE 2

#define CN_OBS_HETERODYNE_CROSS 3

/**
 * Truncated field density matrix.
 */
typedef struct CnFieldState CnFieldState;

/**
 * Two-detector state after the interaction window.
 */
typedef struct CnJointState CnJointState;

/**
 * Sampled joint outcomes of one channel.
 */
typedef struct CnSampleBatch CnSampleBatch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf`, NUL terminated.
 * Returns the message length without the terminator, or -1 when `buf` is too
 * small; an empty string is written when there is no error.
 *
 * # Safety
 * `buf` must point to `len` writable bytes or be null with `len == 0`.
 */
int32_t cn_last_error_message(char *buf, uintptr_t len);

/**
 * Coherent state with amplitude `alpha_re + i alpha_im` at default cutoff.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
int32_t cn_state_coherent(double alpha_re, double alpha_im, struct CnFieldState **out);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
int32_t cn_state_fock(uintptr_t n, struct CnFieldState **out);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
int32_t cn_state_thermal(double nbar, struct CnFieldState **out);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
int32_t cn_state_squeezed(double r,
                          double phi,
                          double displacement_re,
                          double displacement_im,
                          struct CnFieldState **out);

/**
 * Retained Fock dimension and the probability mass outside it.
 *
 * # Safety
 * `state` must be a live handle; outputs must be valid pointers.
 */
int32_t cn_state_info(const struct CnFieldState *state, uintptr_t *dim, double *tail_mass);

/**
 * # Safety
 * `state` must be null or a handle from a `cn_state_*` constructor that has
 * not been freed.
 */
void cn_state_free(struct CnFieldState *state);

/**
 * Evolves `state` through one window of coupling `gamma0_dt` with one of the
 * `CN_MODE_*` paths.
 *
 * # Safety
 * `state` must be a live handle and `out` a valid pointer to a handle slot.
 */
int32_t cn_evolve(const struct CnFieldState *state,
                  double gamma0_dt,
                  int32_t mode,
                  struct CnJointState **out);

/**
 * Mean detector occupations.
 *
 * # Safety
 * `js` must be a live handle; outputs must be valid pointers.
 */
int32_t cn_joint_detector_means(const struct CnJointState *js, double *n1, double *n2);

/**
 * Joint click probability `P(n1, n2)`; zero beyond the detector cutoff.
 *
 * # Safety
 * `js` must be a live handle and `p` a valid pointer.
 */
int32_t cn_joint_click_probability(const struct CnJointState *js,
                                   uintptr_t n1,
                                   uintptr_t n2,
                                   double *p);

/**
 * # Safety
 * `js` must be null or a live handle from [`cn_evolve`].
 */
void cn_joint_free(struct CnJointState *js);

/**
 * Draws `count` joint outcomes of a `CN_CHANNEL_*` channel. Homodyne uses
 * the default automatic grid.
 *
 * # Safety
 * `js` must be a live handle and `out` a valid pointer to a handle slot.
 */
int32_t cn_sample(const struct CnJointState *js,
                  int32_t channel,
                  uintptr_t count,
                  uint64_t seed,
                  struct CnSampleBatch **out);

/**
 * Number of outcomes in the batch.
 *
 * # Safety
 * `batch` must be a live handle and `len` a valid pointer.
 */
int32_t cn_batch_len(const struct CnSampleBatch *batch, uintptr_t *len);

/**
 * Copies the real outcome columns (counts, quadratures or `Re beta`) into
 * `out1` and `out2`, each of capacity `cap`.
 *
 * # Safety
 * `batch` must be a live handle; `out1` and `out2` must each point to `cap`
 * writable doubles.
 */
int32_t cn_batch_real_columns(const struct CnSampleBatch *batch,
                              double *out1,
                              double *out2,
                              uintptr_t cap);

/**
 * Sample covariance of a `CN_OBS_*` observable with its standard error.
 * `value_im` is zero for real observables.
 *
 * # Safety
 * `batch` must be a live handle; outputs must be valid pointers.
 */
int32_t cn_batch_covariance(const struct CnSampleBatch *batch,
                            int32_t observable,
                            double *value_re,
                            double *value_im,
                            double *standard_error);

/**
 * # Safety
 * `batch` must be null or a live handle from [`cn_sample`].
 */
void cn_batch_free(struct CnSampleBatch *batch);

/**
 * Coupling rate in 1/s for SI detector parameters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t cn_gamma0(double mass, double length, double omega, double speed, double *out);

/**
 * Runs a full experiment from a JSON configuration, writing its outputs to
 * the configured directory. Returns `CN_ERR_PARTIAL` if any channel failed.
 *
 * # Safety
 * `config_json` must be a valid NUL-terminated string.
 */
int32_t cn_run_config_json(const char *config_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COHERENCE_NULLTEST_H */
