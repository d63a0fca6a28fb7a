#ifndef HEATMOI_H
#define HEATMOI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HmStatus {
  HM_STATUS_OK = 0,
  HM_STATUS_NULL_POINTER = 1,
  HM_STATUS_INVALID_ARGUMENT = 2,
  HM_STATUS_INVALID_UTF8 = 3,
  HM_STATUS_PARSE = 4,
  HM_STATUS_CONFIG = 5,
  HM_STATUS_NUMERIC = 6,
  HM_STATUS_CHECK_FAILED = 7,
  HM_STATUS_PANIC = 8,
} HmStatus;

/**
 * Validated run configuration.
 */
typedef struct HmConfig HmConfig;

/**
 * Symbolic local invariant or any expression read back from LaTeX.
 */
typedef struct HmExpression HmExpression;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *hm_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void hm_string_free(char *s);

/**
 * Builds `I_k` for even `k`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HmStatus hm_local_invariant(uint32_t k, struct HmExpression **out);

/**
 * Reads an expression from LaTeX in the emitted notation.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum HmStatus hm_expression_parse(const char *text, struct HmExpression **out);

/**
 * # Safety
 * `e` must come from this library and not be freed twice. Null is ignored.
 */
void hm_expression_free(struct HmExpression *e);

/**
 * Number of canonical terms.
 *
 * # Safety
 * `e` must be a live handle and `out` a valid pointer.
 */
enum HmStatus hm_expression_term_count(const struct HmExpression *e, size_t *out);

/**
 * Structural equality of two expressions.
 *
 * # Safety
 * Both handles must be live and `out` a valid pointer.
 */
enum HmStatus hm_expression_equal(const struct HmExpression *a,
                                  const struct HmExpression *b,
                                  bool *out);

/**
 * LaTeX rendering; `d <= 0` keeps the dimension symbolic. Release the
 * result with [`hm_string_free`].
 *
 * # Safety
 * `e` must be a live handle and `out` a valid pointer.
 */
enum HmStatus hm_expression_emit(const struct HmExpression *e, int64_t d, char **out);

/**
 * Divided difference `F_{k,d}^{[n]}(points)` with `n = len - 1`.
 *
 * # Safety
 * `points` must hold `len` doubles and `out` must be valid.
 */
enum HmStatus hm_fkd_divided_difference(uint32_t k,
                                        uint32_t d,
                                        const double *points,
                                        size_t len,
                                        double *out);

/**
 * Second order symbol `Phi(a0, a1)` in dimension `d`.
 *
 * # Safety
 * `out` must be valid.
 */
enum HmStatus hm_phi(double a0, double a1, uint32_t d, double *out);

/**
 * Second order symbol `Psi(a0, a1, a2)` in dimension `d`.
 *
 * # Safety
 * `out` must be valid.
 */
enum HmStatus hm_psi(double a0, double a1, double a2, uint32_t d, double *out);

double hm_k0(double s);

double hm_h0(double s, double t);

double hm_k0d(double s, double d);

/**
 * Parses a TOML configuration; null `text` gives the defaults.
 *
 * # Safety
 * `text` must be null or nul-terminated; `out` must be valid.
 */
enum HmStatus hm_config_parse(const char *text, struct HmConfig **out);

/**
 * Loads a TOML configuration file.
 *
 * # Safety
 * `path` must be nul-terminated; `out` must be valid.
 */
enum HmStatus hm_config_load(const char *path, struct HmConfig **out);

/**
 * # Safety
 * `c` must come from this library and not be freed twice. Null is ignored.
 */
void hm_config_free(struct HmConfig *c);

/**
 * Runs a verification suite (`dd`, `moi`, `symbols`, `conjugation`,
 * `heatfit`). Returns [`HmStatus::CheckFailed`] when a check fails; the
 * tab-separated report is stored in `report` either way if it is non-null.
 *
 * # Safety
 * `suite` must be nul-terminated, `config` null (defaults) or live, and
 * `report` null or valid.
 */
enum HmStatus hm_verify(const char *suite, const struct HmConfig *config, char **report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEATMOI_H */
