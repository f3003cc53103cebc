#ifndef RPCPD_H
#define RPCPD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define RPCPD_VARIANT_CUSUM 0

#define RPCPD_VARIANT_WEIGHTED 1

#define RPCPD_VARIANCE_SPLIT 0

#define RPCPD_VARIANCE_HAC 1

#define RPCPD_TRIM_NONE 0

#define RPCPD_TRIM_N025 1

#define RPCPD_TRIM_LOGN 2

#define RPCPD_TRIM_SQRTN 3

/**
 * Uses `trim_value` as the trim.
 */
#define RPCPD_TRIM_EXPLICIT 4

#define RPCPD_METHOD_BONF 0

#define RPCPD_METHOD_BH 1

#define RPCPD_METHOD_HMP 2

#define RPCPD_METHOD_CCT 3

#define RPCPD_METHOD_HMPRAW 4

#define RPCPD_SETTING_S1 1

#define RPCPD_SETTING_S2 2

#define RPCPD_SETTING_S3 3

/**
 * Result code of every fallible call.
 */
typedef enum RpcpdStatus {
  RPCPD_STATUS_OK = 0,
  RPCPD_STATUS_INVALID_ARGUMENT = 1,
  RPCPD_STATUS_DIMENSION_MISMATCH = 2,
  RPCPD_STATUS_PARSE = 3,
  RPCPD_STATUS_FORMAT = 4,
  RPCPD_STATUS_IO = 5,
  RPCPD_STATUS_CONFIG = 6,
  RPCPD_STATUS_NULL_POINTER = 7,
  RPCPD_STATUS_PANIC = 8,
} RpcpdStatus;

/**
 * Opaque n x p data matrix.
 */
typedef struct RpcpdDataset RpcpdDataset;

/**
 * Opaque sparse direction matrix.
 */
typedef struct RpcpdDirections RpcpdDirections;

/**
 * Opaque result of repeated detection.
 */
typedef struct RpcpdSummary RpcpdSummary;

/**
 * Detector parameters. Fill with `rpcpd_detector_config_default` first.
 */
typedef struct RpcpdDetectorConfig {
  uintptr_t k;
  uint32_t variant;
  uint32_t variance;
  uint32_t trim_rule;
  uintptr_t trim_value;
  uint32_t method;
  double alpha;
  uint64_t seed;
  uintptr_t null_replications;
  uintptr_t null_increments;
  uint64_t null_seed;
} RpcpdDetectorConfig;

/**
 * Generator parameters. Fill with `rpcpd_generator_config_default` first.
 */
typedef struct RpcpdGeneratorConfig {
  uintptr_t n;
  uintptr_t grid_p;
  uintptr_t n_basis;
  uint32_t setting;
  uintptr_t m;
  double snr;
  double theta;
  uint64_t seed;
  double noise_scale;
} RpcpdGeneratorConfig;

/**
 * Outcome of one detection. `winner` is a zero-based projection index.
 */
typedef struct RpcpdReport {
  uintptr_t n;
  uintptr_t p;
  uintptr_t k;
  double p_comb;
  bool significant;
  uintptr_t z_hat;
  double theta_hat;
  uintptr_t winner;
  bool degenerate;
} RpcpdReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *rpcpd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rpcpd_version(void);

enum RpcpdStatus rpcpd_detector_config_default(struct RpcpdDetectorConfig *out);

enum RpcpdStatus rpcpd_generator_config_default(struct RpcpdGeneratorConfig *out);

/**
 * Copies `n * p` row-major values into a new dataset.
 */
enum RpcpdStatus rpcpd_dataset_new(const double *values,
                                   uintptr_t n,
                                   uintptr_t p,
                                   struct RpcpdDataset **out);

/**
 * Reads a numeric CSV file.
 */
enum RpcpdStatus rpcpd_dataset_read_csv(const char *path,
                                        bool has_header,
                                        struct RpcpdDataset **out);

/**
 * Simulates a functional dataset; the true change index goes to `true_z`.
 */
enum RpcpdStatus rpcpd_generate(const struct RpcpdGeneratorConfig *config,
                                struct RpcpdDataset **out,
                                uintptr_t *true_z);

uintptr_t rpcpd_dataset_n(const struct RpcpdDataset *d);

uintptr_t rpcpd_dataset_p(const struct RpcpdDataset *d);

/**
 * Copies the row-major values into `buf`, which must hold `n * p` doubles.
 */
enum RpcpdStatus rpcpd_dataset_values(const struct RpcpdDataset *d, double *buf, uintptr_t len);

void rpcpd_dataset_free(struct RpcpdDataset *d);

/**
 * Draws a `p x k` sparse direction matrix.
 */
enum RpcpdStatus rpcpd_directions_new(uintptr_t p,
                                      uintptr_t k,
                                      uint64_t seed,
                                      struct RpcpdDirections **out);

/**
 * Number of nonzero entries.
 */
uintptr_t rpcpd_directions_nnz(const struct RpcpdDirections *d);

/**
 * Entry `(row, col)` of the direction matrix; 0 when out of range.
 */
double rpcpd_directions_entry(const struct RpcpdDirections *d, uintptr_t row, uintptr_t col);

void rpcpd_directions_free(struct RpcpdDirections *d);

/**
 * Runs the detector with directions drawn from `config->seed`.
 */
enum RpcpdStatus rpcpd_detect(const struct RpcpdDataset *data,
                              const struct RpcpdDetectorConfig *config,
                              struct RpcpdReport *out);

/**
 * Runs the detector on caller-supplied directions; `config->k` and
 * `config->seed` are ignored.
 */
enum RpcpdStatus rpcpd_detect_with_directions(const struct RpcpdDataset *data,
                                              const struct RpcpdDetectorConfig *config,
                                              const struct RpcpdDirections *directions,
                                              struct RpcpdReport *out);

/**
 * Repeats detection `reps` times with derived seeds.
 */
enum RpcpdStatus rpcpd_detect_repeated(const struct RpcpdDataset *data,
                                       const struct RpcpdDetectorConfig *config,
                                       uintptr_t reps,
                                       struct RpcpdSummary **out);

uintptr_t rpcpd_summary_mode(const struct RpcpdSummary *s);

uintptr_t rpcpd_summary_mode_count(const struct RpcpdSummary *s);

uintptr_t rpcpd_summary_repetitions(const struct RpcpdSummary *s);

/**
 * Copies up to `len` per-repetition locations into `buf` and returns the
 * total number of repetitions.
 */
uintptr_t rpcpd_summary_locations(const struct RpcpdSummary *s, uintptr_t *buf, uintptr_t len);

void rpcpd_summary_free(struct RpcpdSummary *s);

/**
 * Combines `k` p-values. `adjusted` may be null; otherwise it receives `k`
 * adjusted values for Bonferroni and BH and is left untouched for the
 * other methods. `winner` is zero-based.
 */
enum RpcpdStatus rpcpd_combine(uint32_t method_code,
                               const double *raw,
                               uintptr_t k,
                               double *p_comb,
                               uintptr_t *winner,
                               double *adjusted);

/**
 * `P(sup |B| > x)` for a standard Brownian bridge.
 */
double rpcpd_standard_pvalue(double x);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RPCPD_H */
