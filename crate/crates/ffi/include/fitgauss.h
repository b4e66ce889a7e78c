#ifndef FITGAUSS_H
#define FITGAUSS_H

#include <stddef.h>

typedef enum FgStatus {
  FG_STATUS_OK = 0,
  FG_STATUS_NULL_POINTER = 1,
  FG_STATUS_INVALID_ARGUMENT = 2,
  FG_STATUS_SINGULAR_PARAMETER = 3,
  FG_STATUS_BRANCH_FAILURE = 4,
  FG_STATUS_SINGULAR_MATRIX = 5,
  FG_STATUS_PARSE_ERROR = 6,
  FG_STATUS_INTEGRATION_FAILED = 7,
  FG_STATUS_PANIC = 8,
} FgStatus;

typedef enum FgMethodKind {
  FG_METHOD_KIND_CLASSICAL = 0,
  FG_METHOD_KIND_PHASE_FITTED = 1,
  FG_METHOD_KIND_PHASE_DISSIPATION_FITTED = 2,
} FgMethodKind;

// Opaque Butcher tableau.
typedef struct FgTableau FgTableau;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next `fg_*` call on the same thread.
const char *fg_last_error(void);

// The classical two-stage Gauss tableau.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum FgStatus fg_tableau_gauss2(struct FgTableau **out);

// The tableau of `kind` fitted at `v = omega h`.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum FgStatus fg_tableau_fit(enum FgMethodKind kind, double v, struct FgTableau **out);

// Parses a tableau from text: the stage count, then one `c A-row` line
// per stage, then the weights.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum FgStatus fg_tableau_parse(const char *text, struct FgTableau **out);

// Releases a handle. Null is accepted.
//
// # Safety
// `tab` must come from an `fg_tableau_*` constructor and not be freed twice.
void fg_tableau_free(struct FgTableau *tab);

// Number of stages, or 0 for a null handle.
//
// # Safety
// `tab` must be null or a live handle.
size_t fg_tableau_stages(const struct FgTableau *tab);

// Copies `c` (s values), `A` (s * s values, row-major) and `b` (s values)
// into caller buffers. `stages` must equal the tableau's stage count.
//
// # Safety
// `tab` must be a live handle and each buffer must hold the stated count.
enum FgStatus fg_tableau_coefficients(const struct FgTableau *tab,
                                      size_t stages,
                                      double *c,
                                      double *a,
                                      double *b);

// Phase-lag of `tab` at `v`.
//
// # Safety
// `tab` must be a live handle and `out` writable.
enum FgStatus fg_phase_lag(const struct FgTableau *tab, double v, double *out);

// Dissipation of `tab` at `v`.
//
// # Safety
// `tab` must be a live handle and `out` writable.
enum FgStatus fg_dissipation(const struct FgTableau *tab, double v, double *out);

// Fitted `b2` and `a22` at `v`; `a22` is 1/4 unless `kind` fits dissipation.
//
// # Safety
// `b2` and `a22` must be writable.
enum FgStatus fg_fit_coefficients(enum FgMethodKind kind, double v, double *b2, double *a22);

// Runs one benchmark cell and reports its error and work. The step count
// may be raised to align frequency breakpoints; `n_steps_used` receives the
// count actually run.
//
// # Safety
// `method` and `problem` must be NUL-terminated strings; the outputs must
// be writable.
enum FgStatus fg_run_problem(const char *method,
                             const char *problem,
                             size_t n_steps,
                             double *error,
                             size_t *work,
                             size_t *n_steps_used);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FITGAUSS_H */
