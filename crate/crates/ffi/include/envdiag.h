#ifndef ENVDIAG_H
#define ENVDIAG_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EnvdiagDistKind {
  /**
   * `p1` is the frequency.
   */
  ENVDIAG_DIST_KIND_CONSTANT = 0,
  /**
   * `p1`, `p2` are the bounds.
   */
  ENVDIAG_DIST_KIND_UNIFORM = 1,
  /**
   * `p1` is the mean, `p2` the standard deviation.
   */
  ENVDIAG_DIST_KIND_NORMAL = 2,
} EnvdiagDistKind;

typedef enum EnvdiagStatus {
  ENVDIAG_STATUS_OK = 0,
  ENVDIAG_STATUS_NULL_POINTER = 1,
  ENVDIAG_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The analysis could not be carried out (short signal, failed peak
   * search, too many failed segments, ...).
   */
  ENVDIAG_STATUS_ANALYSIS = 3,
  ENVDIAG_STATUS_DIGEST_MISMATCH = 4,
  ENVDIAG_STATUS_MISSING_SEGMENT_LENGTH = 5,
  ENVDIAG_STATUS_IO = 6,
  ENVDIAG_STATUS_PARSE = 7,
  ENVDIAG_STATUS_BUFFER_TOO_SMALL = 8,
  ENVDIAG_STATUS_PANIC = 9,
} EnvdiagStatus;

typedef enum EnvdiagVerdict {
  ENVDIAG_VERDICT_CONSTANT = 0,
  ENVDIAG_VERDICT_UNIFORM = 1,
  ENVDIAG_VERDICT_NORMAL = 2,
  ENVDIAG_VERDICT_NOT_CONSTANT_INCONCLUSIVE = 3,
} EnvdiagVerdict;

typedef enum EnvdiagWindow {
  ENVDIAG_WINDOW_HANN = 0,
  ENVDIAG_WINDOW_HAMMING = 1,
  ENVDIAG_WINDOW_RECTANGULAR = 2,
} EnvdiagWindow;

typedef struct EnvdiagReport EnvdiagReport;

typedef struct EnvdiagSignal EnvdiagSignal;

typedef struct EnvdiagSpectrum EnvdiagSpectrum;

typedef struct EnvdiagTable EnvdiagTable;

/**
 * Envelope-spectrum settings. Obtain defaults from
 * [`envdiag_spectrum_params_default`].
 */
typedef struct EnvdiagSpectrumParams {
  bool use_band;
  double band_lo;
  double band_hi;
  enum EnvdiagWindow window;
  size_t zero_pad_factor;
  size_t welch_segments;
  double welch_overlap;
} EnvdiagSpectrumParams;

/**
 * Calibration settings. Null grid pointers select the default ACI and
 * segment-length grids.
 */
typedef struct EnvdiagCalibrationParams {
  double fs;
  size_t n_signals;
  uint64_t seed;
  const double *aci;
  size_t n_aci;
  const double *seg_lens;
  size_t n_seg_lens;
} EnvdiagCalibrationParams;

typedef struct EnvdiagClassifyParams {
  double f_theoretical;
  double seg_len;
  double alpha;
  /**
   * Use the table's band-pass; otherwise `band_lo`/`band_hi` when
   * `use_band` is set, or none.
   */
  bool use_table_band;
  bool use_band;
  double band_lo;
  double band_hi;
  bool literal_rescale;
} EnvdiagClassifyParams;

/**
 * Scalar fields of a classification report. `statistic` and `critical`
 * are NaN when the variance test did not run.
 */
typedef struct EnvdiagReportSummary {
  double seg_len;
  size_t n_segments;
  size_t n_failed;
  double mean_f_hat;
  double avg_snr;
  double matched_aci;
  double threshold;
  double sample_variance;
  double rescaled_variance;
  bool below_threshold;
  bool test_ran;
  bool rejected;
  double statistic;
  double critical;
  enum EnvdiagVerdict verdict;
} EnvdiagReportSummary;

typedef struct EnvdiagSimulationParams {
  enum EnvdiagDistKind dist;
  double p1;
  double p2;
  double aci;
  double duration;
  double fs;
} EnvdiagSimulationParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *envdiag_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void envdiag_string_free(char *s);

struct EnvdiagSpectrumParams envdiag_spectrum_params_default(void);

struct EnvdiagCalibrationParams envdiag_calibration_params_default(void);

struct EnvdiagClassifyParams envdiag_classify_params_default(void);

/**
 * Parse a threshold table from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum EnvdiagStatus envdiag_table_from_json(const char *json, struct EnvdiagTable **out);

/**
 * Load a threshold table from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum EnvdiagStatus envdiag_table_load(const char *path, struct EnvdiagTable **out);

/**
 * Build a threshold table by simulation.
 *
 * # Safety
 * `params` must point to a valid struct whose grid pointers are null or
 * point to the stated number of doubles; `out` must be writable.
 */
enum EnvdiagStatus envdiag_table_calibrate(const struct EnvdiagCalibrationParams *params,
                                           struct EnvdiagTable **out);

/**
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
enum EnvdiagStatus envdiag_table_to_json(const struct EnvdiagTable *table, char **out);

/**
 * Threshold of one table cell.
 *
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
enum EnvdiagStatus envdiag_table_threshold(const struct EnvdiagTable *table,
                                           double aci,
                                           double seg_len,
                                           double *out);

/**
 * # Safety
 * `table` must be null or a handle not yet freed.
 */
void envdiag_table_free(struct EnvdiagTable *table);

/**
 * Classify a recorded signal at one segment length.
 *
 * # Safety
 * `samples` must point to `n` doubles; `table` must be a live handle;
 * `params` must point to a valid struct; `out` must be writable.
 */
enum EnvdiagStatus envdiag_classify_samples(const double *samples,
                                            size_t n,
                                            double fs,
                                            const struct EnvdiagTable *table,
                                            const struct EnvdiagClassifyParams *params,
                                            struct EnvdiagReport **out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum EnvdiagStatus envdiag_report_verdict(const struct EnvdiagReport *report,
                                          enum EnvdiagVerdict *out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum EnvdiagStatus envdiag_report_summary(const struct EnvdiagReport *report,
                                          struct EnvdiagReportSummary *out);

/**
 * Copy the per-segment estimates into `buf` (capacity `cap`); the number
 * of estimates is written to `len` even when the buffer is too small.
 *
 * # Safety
 * `report` must be a live handle; `buf` must hold `cap` doubles; `len`
 * must be writable.
 */
enum EnvdiagStatus envdiag_report_estimates(const struct EnvdiagReport *report,
                                            double *buf,
                                            size_t cap,
                                            size_t *len);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum EnvdiagStatus envdiag_report_to_json(const struct EnvdiagReport *report, char **out);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void envdiag_report_free(struct EnvdiagReport *report);

/**
 * # Safety
 * `samples` must point to `n` doubles; `params` must point to a valid
 * struct; `out` must be writable.
 */
enum EnvdiagStatus envdiag_envelope_spectrum(const double *samples,
                                             size_t n,
                                             double fs,
                                             const struct EnvdiagSpectrumParams *params,
                                             struct EnvdiagSpectrum **out);

/**
 * Number of bins, or 0 for a null handle.
 *
 * # Safety
 * `spec` must be null or a live handle.
 */
size_t envdiag_spectrum_len(const struct EnvdiagSpectrum *spec);

/**
 * Bin spacing in Hz, or NaN for a null handle.
 *
 * # Safety
 * `spec` must be null or a live handle.
 */
double envdiag_spectrum_df(const struct EnvdiagSpectrum *spec);

/**
 * Copy frequencies and amplitudes into caller buffers of capacity `cap`.
 * Either buffer may be null to skip it.
 *
 * # Safety
 * `spec` must be a live handle; non-null buffers must hold `cap` doubles.
 */
enum EnvdiagStatus envdiag_spectrum_copy(const struct EnvdiagSpectrum *spec,
                                         double *freqs,
                                         double *amps,
                                         size_t cap);

/**
 * # Safety
 * `spec` must be null or a handle not yet freed.
 */
void envdiag_spectrum_free(struct EnvdiagSpectrum *spec);

/**
 * Three-harmonic fault-frequency estimate with default settings apart from
 * `search_frac`.
 *
 * # Safety
 * `spec` must be a live handle; `f_hat` and `snr` must be writable.
 */
enum EnvdiagStatus envdiag_estimate_fault_frequency(const struct EnvdiagSpectrum *spec,
                                                    double f_theoretical,
                                                    double search_frac,
                                                    double *f_hat,
                                                    double *snr);

/**
 * Upper `p` quantile of the chi-squared law with `dof` degrees of freedom.
 *
 * # Safety
 * `out` must be writable.
 */
enum EnvdiagStatus envdiag_chi2_critical(double p, uint32_t dof, double *out);

/**
 * Simulate one record.
 *
 * # Safety
 * `params` must point to a valid struct; `out` must be writable.
 */
enum EnvdiagStatus envdiag_simulate(const struct EnvdiagSimulationParams *params,
                                    uint64_t seed,
                                    struct EnvdiagSignal **out);

/**
 * # Safety
 * `signal` must be null or a live handle.
 */
size_t envdiag_signal_len(const struct EnvdiagSignal *signal);

/**
 * Fault frequency drawn for the record, or NaN for a null handle.
 *
 * # Safety
 * `signal` must be null or a live handle.
 */
double envdiag_signal_f_true(const struct EnvdiagSignal *signal);

/**
 * # Safety
 * `signal` must be a live handle; `buf` must hold `cap` doubles.
 */
enum EnvdiagStatus envdiag_signal_copy(const struct EnvdiagSignal *signal, double *buf, size_t cap);

/**
 * # Safety
 * `signal` must be null or a handle not yet freed.
 */
void envdiag_signal_free(struct EnvdiagSignal *signal);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENVDIAG_H */
