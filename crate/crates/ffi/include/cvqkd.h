#ifndef CVQKD_H
#define CVQKD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CvqkdStatus {
  CVQKD_STATUS_OK = 0,
  CVQKD_STATUS_DOMAIN = 1,
  CVQKD_STATUS_INCONSISTENT_STATISTICS = 2,
  CVQKD_STATUS_UNPHYSICAL = 3,
  CVQKD_STATUS_INSUFFICIENT_DATA = 4,
  CVQKD_STATUS_DEGENERATE_DATA = 5,
  CVQKD_STATUS_CONFIGURATION = 6,
  CVQKD_STATUS_PARSE = 7,
  CVQKD_STATUS_CAPACITY = 8,
  CVQKD_STATUS_VERIFICATION_FAILED = 9,
  CVQKD_STATUS_IO = 10,
  CVQKD_STATUS_NULL_POINTER = 11,
  CVQKD_STATUS_INVALID_STRING = 12,
  CVQKD_STATUS_PANIC = 13,
} CvqkdStatus;

typedef enum CvqkdProtocol {
  CVQKD_PROTOCOL_SQUEEZED = 0,
  CVQKD_PROTOCOL_COHERENT = 1,
} CvqkdProtocol;

typedef enum CvqkdTransform {
  CVQKD_TRANSFORM_BEAM_SPLITTER = 0,
  CVQKD_TRANSFORM_SHOT_NOISE_SUBTRACTED = 1,
} CvqkdTransform;

/**
 * Excess-noise shape; non-Gaussian shapes are matched to the variance `t * eps`.
 */
typedef enum CvqkdShape {
  CVQKD_SHAPE_GAUSSIAN = 0,
  CVQKD_SHAPE_MIXTURE = 1,
  CVQKD_SHAPE_UNIFORM = 2,
  CVQKD_SHAPE_DISCRETE = 3,
} CvqkdShape;

typedef enum CvqkdFormat {
  CVQKD_FORMAT_CSV = 0,
  CVQKD_FORMAT_JSON_LINES = 1,
} CvqkdFormat;

/**
 * Opaque session record.
 */
typedef struct CvqkdRecord CvqkdRecord;

typedef struct CvqkdCovariance {
  double var_a;
  double var_b;
  double cov_ab;
} CvqkdCovariance;

/**
 * Rate bound in bits; `cond_var_b_given_a_prime` is NaN for the squeezed protocol.
 */
typedef struct CvqkdRateReport {
  enum CvqkdProtocol protocol;
  uint64_t block_size;
  double delta_i_min_per_pulse;
  double delta_i_min_block;
  double i_ab;
  double i_be_bound;
  double cond_var_b_given_a;
  double cond_var_b_given_a_prime;
  bool sifting_applied;
  bool saturated;
} CvqkdRateReport;

typedef struct CvqkdSessionConfig {
  enum CvqkdProtocol protocol;
  double v;
  double t;
  double eps;
  enum CvqkdShape shape;
  double block_correlation;
  size_t n;
  size_t l;
  bool random_basis;
  uint64_t seed;
} CvqkdSessionConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cvqkd_last_error_message(void);

/**
 * Entropy of the vacuum quadrature in bits (shot noise 1).
 */
double cvqkd_vacuum_entropy(void);

/**
 * # Safety
 * `k` must be readable and `out` writable (or null, which fails).
 */
enum CvqkdStatus cvqkd_gaussian_conditional_entropy(const struct CvqkdCovariance *k,
                                                    double *out_bits);

/**
 * Rate bound for `protocol` over blocks of `n` pulses.
 *
 * # Safety
 * `k` must be readable and `report` writable.
 */
enum CvqkdStatus cvqkd_rate_bound(const struct CvqkdCovariance *k,
                                  uint64_t n,
                                  enum CvqkdProtocol protocol,
                                  enum CvqkdTransform transform,
                                  struct CvqkdRateReport *report);

/**
 * `beta * I_AB - I_BE` in bits per pulse, with the rates halved first when
 * `random_basis` is set.
 *
 * # Safety
 * `k` must be readable and `out_rate` writable.
 */
enum CvqkdStatus cvqkd_effective_rate(const struct CvqkdCovariance *k,
                                      enum CvqkdProtocol protocol,
                                      enum CvqkdTransform transform,
                                      double beta,
                                      bool random_basis,
                                      double *out_rate);

/**
 * Simulates a session into a new record handle.
 *
 * # Safety
 * `config` must be readable and `record` writable.
 */
enum CvqkdStatus cvqkd_simulate(const struct CvqkdSessionConfig *config,
                                struct CvqkdRecord **record);

/**
 * Reads a record file (either format) into a new handle.
 *
 * # Safety
 * `file` must be a nul-terminated string and `record` writable.
 */
enum CvqkdStatus cvqkd_record_read(const char *file, struct CvqkdRecord **record);

/**
 * # Safety
 * `record` must be a live handle and `file` a nul-terminated string.
 */
enum CvqkdStatus cvqkd_record_write(const struct CvqkdRecord *record,
                                    const char *file,
                                    enum CvqkdFormat format);

/**
 * Total pulses in the record; 0 for a null handle.
 *
 * # Safety
 * `record` must be null or a live handle.
 */
size_t cvqkd_record_pulse_count(const struct CvqkdRecord *record);

/**
 * Pulses kept after sifting; 0 for a null handle.
 *
 * # Safety
 * `record` must be null or a live handle.
 */
size_t cvqkd_record_kept_count(const struct CvqkdRecord *record);

/**
 * Sample covariance of the kept pulses, both quadratures pooled.
 *
 * # Safety
 * `record` must be a live handle and `k` writable.
 */
enum CvqkdStatus cvqkd_record_covariance(const struct CvqkdRecord *record,
                                         struct CvqkdCovariance *k);

/**
 * Rate bound from the record's own statistics, protocol and block size;
 * sifting is applied when the record used random bases.
 *
 * # Safety
 * `record` must be a live handle and `report` writable.
 */
enum CvqkdStatus cvqkd_record_rate(const struct CvqkdRecord *record,
                                   enum CvqkdTransform transform,
                                   struct CvqkdRateReport *report);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `record` must be null or a handle not yet freed.
 */
void cvqkd_record_free(struct CvqkdRecord *record);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVQKD_H */
