#ifndef BSQMC_H
#define BSQMC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BsqmcStatus {
  BSQMC_STATUS_OK = 0,
  BSQMC_STATUS_NULL_POINTER = 1,
  // Malformed JSON or a non-UTF-8 string.
  BSQMC_STATUS_PARSE = 2,
  // Input violates an invariant (not a state, bad partition, ...).
  BSQMC_STATUS_INVARIANT = 3,
  // Dimension cap exceeded, or an output buffer is too small.
  BSQMC_STATUS_TOO_LARGE = 4,
  // An operator that must be invertible is singular.
  BSQMC_STATUS_SINGULAR = 5,
  // Any other computational failure.
  BSQMC_STATUS_FAILED = 6,
  // A panic was caught at the boundary.
  BSQMC_STATUS_INTERNAL = 7,
} BsqmcStatus;

typedef enum BsqmcBsCmi {
  BSQMC_BS_CMI_OS = 0,
  BSQMC_BS_CMI_TS = 1,
  BSQMC_BS_CMI_REV = 2,
} BsqmcBsCmi;

typedef enum BsqmcRecoveryMap {
  BSQMC_RECOVERY_MAP_PETZ = 0,
  BSQMC_RECOVERY_MAP_BS = 1,
  BSQMC_RECOVERY_MAP_BS_SYM = 2,
  BSQMC_RECOVERY_MAP_PHI = 3,
} BsqmcRecoveryMap;

// Opaque density matrix with labelled subsystems.
typedef struct BsqmcState BsqmcState;

typedef struct BsqmcCertificate {
  double res_petz;
  double res_b;
  double res_bsym;
  double res_phi;
  double cmi;
  // `INFINITY` when a BS entropy term diverges.
  double bs_cmi_rev;
  double eta_commutator;
  double tol;
  bool is_qmc;
  bool is_bsqmc;
  bool marginal;
} BsqmcCertificate;

typedef struct BsqmcDecayRow {
  size_t size_a;
  size_t size_b;
  size_t size_c;
  double i_eta;
  double i_rev;
  double bound_chain;
} BsqmcDecayRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *bsqmc_last_error(void);

// Parses a JSON state file body.
//
// # Safety
// `json` must be a nul-terminated string and `out` a writable pointer.
enum BsqmcStatus bsqmc_state_from_json(const char *json, struct BsqmcState **out);

// Builds a state from row-major real and imaginary parts of a `d x d`
// matrix, `d` the product of `dims`. `im` may be null for a real matrix.
//
// # Safety
// `labels` and `dims` must hold `n_sys` entries, `re` (and `im` if not
// null) `d * d` entries, and `out` must be writable.
enum BsqmcStatus bsqmc_state_from_matrix(size_t n_sys,
                                         const char *const *labels,
                                         const size_t *dims,
                                         const double *re,
                                         const double *im,
                                         struct BsqmcState **out);

// The bundled 2x2x2 BS-QMC that is not a QMC, labels `A`, `B`, `C`.
//
// # Safety
// `out` must be writable.
enum BsqmcStatus bsqmc_example31(struct BsqmcState **out);

// # Safety
// `state` must come from this library and not have been freed; null is a no-op.
void bsqmc_state_free(struct BsqmcState *state);

// Total Hilbert-space dimension, 0 for null.
//
// # Safety
// `state` must be null or a live handle.
size_t bsqmc_state_dim(const struct BsqmcState *state);

// Serializes a state; release the string with `bsqmc_string_free`.
//
// # Safety
// `state` must be a live handle and `out` writable.
enum BsqmcStatus bsqmc_state_to_json(const struct BsqmcState *state, char **out);

// # Safety
// `s` must come from this library; null is a no-op.
void bsqmc_string_free(char *s);

// Conditional mutual information for a partition such as `"A,B,C"`.
//
// # Safety
// Pointers must be valid; `partition` nul-terminated.
enum BsqmcStatus bsqmc_cmi(const struct BsqmcState *state, const char *partition, double *out);

// # Safety
// Pointers must be valid; `partition` nul-terminated.
enum BsqmcStatus bsqmc_bs_cmi(const struct BsqmcState *state,
                              const char *partition,
                              enum BsqmcBsCmi variant,
                              double *out);

// Recovery residuals and verdicts at tolerance `tol`.
//
// # Safety
// Pointers must be valid; `partition` nul-terminated.
enum BsqmcStatus bsqmc_certify(const struct BsqmcState *state,
                               const char *partition,
                               double tol,
                               struct BsqmcCertificate *out);

// The associated `eta` as a new handle.
//
// # Safety
// Pointers must be valid; `partition` nul-terminated.
enum BsqmcStatus bsqmc_eta(const struct BsqmcState *state,
                           const char *partition,
                           struct BsqmcState **out);

// `||R_{B->AB}(rho_BC) - rho||_1` for the chosen map.
//
// # Safety
// Pointers must be valid; `partition` nul-terminated.
enum BsqmcStatus bsqmc_recovery_residual(const struct BsqmcState *state,
                                         const char *partition,
                                         enum BsqmcRecoveryMap map,
                                         double *out);

// Decay rows of the TFIM Gibbs state on `sites` sites for every
// admissible `|B|`. Writes at most `cap` rows and the row count to
// `written`; fails with `TooLarge` when `cap` is too small.
//
// # Safety
// `rows` must hold `cap` entries and `written` must be writable.
enum BsqmcStatus bsqmc_tfim_decay(size_t sites,
                                  double beta,
                                  double coupling,
                                  double field,
                                  struct BsqmcDecayRow *rows,
                                  size_t cap,
                                  size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BSQMC_H */
