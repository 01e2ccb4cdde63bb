#ifndef GENINV_H
#define GENINV_H

#include <stddef.h>
#include <stdint.h>

typedef enum GeninvStatus {
  GENINV_STATUS_OK = 0,
  GENINV_STATUS_VALIDATION = 1,
  GENINV_STATUS_NUMERICAL = 2,
  GENINV_STATUS_IO = 3,
  GENINV_STATUS_NULL_POINTER = 4,
  GENINV_STATUS_PANIC = 5,
} GeninvStatus;

typedef enum GeninvTransform {
  GENINV_TRANSFORM_PLUS = 0,
  GENINV_TRANSFORM_MINUS = 1,
  GENINV_TRANSFORM_MP = 2,
  GENINV_TRANSFORM_UNDERLINE = 3,
} GeninvTransform;

typedef enum GeninvNoise {
  GENINV_NOISE_GAUSSIAN = 0,
  GENINV_NOISE_RADEMACHER = 1,
  GENINV_NOISE_UNIFORM_SCALED = 2,
} GeninvNoise;

/**
 * Opaque population spectrum.
 */
typedef struct GeninvSpectrum GeninvSpectrum;

/**
 * Opaque result of a Monte-Carlo sweep.
 */
typedef struct GeninvSweep GeninvSweep;

typedef struct GeninvAsymptotic {
  double c;
  double fro_plus;
  double fro_minus;
  double nfl;
  double m0;
  double trace_minus;
} GeninvAsymptotic;

typedef struct GeninvSolution {
  double m_re;
  double m_im;
  double residual;
  size_t iterations;
  double damping;
} GeninvSolution;

typedef struct GeninvRow {
  double c_target;
  double c_eff;
  size_t p;
  size_t n;
  size_t replicate;
  uint64_t seed;
  double fro_plus_emp;
  double fro_minus_emp;
  double nfl_emp;
  double nfl_asym;
  double trace_minus_emp;
  double precision_estimate;
} GeninvRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next call.
 */
const char *geninv_last_error_message(void);

/**
 * Parses `"w:t,w:t,..."` into a new spectrum handle.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` must be valid for writes.
 */
enum GeninvStatus geninv_spectrum_parse(const char *text, struct GeninvSpectrum **out);

/**
 * Builds a spectrum from parallel arrays of weights and eigenvalues.
 *
 * # Safety
 * `weights` and `eigenvalues` must each hold `len` doubles; `out` must be valid for writes.
 */
enum GeninvStatus geninv_spectrum_from_atoms(const double *weights,
                                             const double *eigenvalues,
                                             size_t len,
                                             struct GeninvSpectrum **out);

/**
 * # Safety
 * `spectrum` must be NULL or a handle from this library not yet freed.
 */
void geninv_spectrum_free(struct GeninvSpectrum *spectrum);

/**
 * Number of atoms after canonicalization.
 *
 * # Safety
 * `spectrum` must be a live handle; `out` must be valid for writes.
 */
enum GeninvStatus geninv_spectrum_atom_count(const struct GeninvSpectrum *spectrum, size_t *out);

/**
 * `∫ τ^{-k} dH(τ)` for `k` in {1, 2}.
 *
 * # Safety
 * `spectrum` must be a live handle; `out` must be valid for writes.
 */
enum GeninvStatus geninv_spectrum_inverse_moment(const struct GeninvSpectrum *spectrum,
                                                 uint32_t k,
                                                 double *out);

/**
 * Limiting Frobenius norms, NFL, `m_F̲(0)` and the trace limit of `S⁻`.
 *
 * # Safety
 * `spectrum` must be a live handle; `out` must be valid for writes.
 */
enum GeninvStatus geninv_asymptotic(const struct GeninvSpectrum *spectrum,
                                    double c,
                                    struct GeninvAsymptotic *out);

/**
 * Solves the limiting Stieltjes transform `which` at `z_re + i z_im`.
 *
 * # Safety
 * `spectrum` must be a live handle; `out` must be valid for writes.
 */
enum GeninvStatus geninv_solve(enum GeninvTransform which,
                               double z_re,
                               double z_im,
                               double c,
                               const struct GeninvSpectrum *spectrum,
                               double tol,
                               size_t max_iter,
                               struct GeninvSolution *out);

/**
 * One Monte-Carlo replication at dimension `p` and concentration `c`.
 *
 * # Safety
 * `spectrum` must be a live handle; `out` must be valid for writes.
 */
enum GeninvStatus geninv_replication(const struct GeninvSpectrum *spectrum,
                                     size_t p,
                                     double c,
                                     enum GeninvNoise noise,
                                     uint64_t seed,
                                     struct GeninvRow *out);

/**
 * Runs a sweep over `c_list × p_grid × replications`. `threads = 0` uses the
 * global pool. Results do not depend on the thread count.
 *
 * # Safety
 * Arrays must hold the stated number of elements; `out` must be valid for writes.
 */
enum GeninvStatus geninv_sweep_run(const struct GeninvSpectrum *spectrum,
                                   const double *c_list,
                                   size_t c_len,
                                   const size_t *p_grid,
                                   size_t p_len,
                                   size_t replications,
                                   enum GeninvNoise noise,
                                   uint64_t seed,
                                   size_t threads,
                                   struct GeninvSweep **out);

/**
 * # Safety
 * `sweep` must be NULL or a handle from this library not yet freed.
 */
void geninv_sweep_free(struct GeninvSweep *sweep);

/**
 * Number of successful rows and failed replications.
 *
 * # Safety
 * `sweep` must be a live handle; outputs must be valid for writes.
 */
enum GeninvStatus geninv_sweep_counts(const struct GeninvSweep *sweep,
                                      size_t *rows,
                                      size_t *failures);

/**
 * Row `index` in `(c, p, replicate)` order.
 *
 * # Safety
 * `sweep` must be a live handle; `out` must be valid for writes.
 */
enum GeninvStatus geninv_sweep_row(const struct GeninvSweep *sweep,
                                   size_t index,
                                   struct GeninvRow *out);

/**
 * Writes the rows CSV to `path` and the per-cell summary next to it.
 *
 * # Safety
 * `sweep` must be a live handle; `path` must be a nul-terminated string.
 */
enum GeninvStatus geninv_sweep_write_csv(const struct GeninvSweep *sweep, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENINV_H */
