#ifndef VNLW_H
#define VNLW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum VnlwStatus {
  VNLW_STATUS_OK = 0,
  VNLW_STATUS_NULL_POINTER = 1,
  VNLW_STATUS_INVALID_ARGUMENT = 2,
  VNLW_STATUS_BUFFER_TOO_SMALL = 3,
  VNLW_STATUS_NUMERICAL = 4,
  VNLW_STATUS_SCHEMA = 5,
  VNLW_STATUS_PANIC = 6,
} VnlwStatus;

/**
 * Propagation method for [`vnlw_bipartite_propagate`].
 */
typedef enum VnlwMethod {
  VNLW_METHOD_CRANK_NICOLSON = 0,
  VNLW_METHOD_EIGENBASIS = 1,
} VnlwMethod;

typedef struct VnlwBipartite VnlwBipartite;

typedef struct VnlwEigenSystem VnlwEigenSystem;

typedef struct VnlwHamiltonian VnlwHamiltonian;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread ("" after a success).
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *vnlw_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vnlw_version(void);

/**
 * Builds the Hamiltonian on `n_points` nodes spanning `[x_min, x_max]`.
 * `potential_json` is a potential object such as
 * `{"kind":"harmonic","omega":1}`; NULL selects the infinite box.
 *
 * # Safety
 * `potential_json` must be NULL or a NUL-terminated string; `out` must be a
 * valid pointer to writable storage.
 */
enum VnlwStatus vnlw_hamiltonian_new(double x_min,
                                     double x_max,
                                     size_t n_points,
                                     const char *potential_json,
                                     double hbar,
                                     double mass,
                                     struct VnlwHamiltonian **out);

/**
 * # Safety
 * `h` must be NULL or a handle from [`vnlw_hamiltonian_new`] not yet freed.
 */
void vnlw_hamiltonian_free(struct VnlwHamiltonian *h);

/**
 * Number of grid points (0 for a NULL handle).
 *
 * # Safety
 * `h` must be NULL or a live handle.
 */
size_t vnlw_hamiltonian_n_points(const struct VnlwHamiltonian *h);

/**
 * Lowest `k` eigenpairs of `h`.
 *
 * # Safety
 * `h` must be a live handle; `out` must be valid writable storage.
 */
enum VnlwStatus vnlw_eigensystem_new(const struct VnlwHamiltonian *h,
                                     size_t k,
                                     struct VnlwEigenSystem **out);

/**
 * # Safety
 * `e` must be NULL or a handle not yet freed.
 */
void vnlw_eigensystem_free(struct VnlwEigenSystem *e);

/**
 * Number of eigenpairs (0 for a NULL handle).
 *
 * # Safety
 * `e` must be NULL or a live handle.
 */
size_t vnlw_eigensystem_k(const struct VnlwEigenSystem *e);

/**
 * Copies the `k` energies (ascending) into `out`.
 *
 * # Safety
 * `e` must be a live handle; `out` must hold `len` doubles.
 */
enum VnlwStatus vnlw_eigensystem_energies(const struct VnlwEigenSystem *e, double *out, size_t len);

/**
 * Copies eigenstate `n` (real, `n_points` values, zero at the walls).
 *
 * # Safety
 * `e` must be a live handle; `out` must hold `len` doubles.
 */
enum VnlwStatus vnlw_eigensystem_state(const struct VnlwEigenSystem *e,
                                       size_t n,
                                       double *out,
                                       size_t len);

/**
 * Kernel `ψ_n(x) ψ_m*(y)`.
 *
 * # Safety
 * `e` must be a live handle; `out` must be valid writable storage.
 */
enum VnlwStatus vnlw_bipartite_from_eigenpair(const struct VnlwEigenSystem *e,
                                              size_t n,
                                              size_t m,
                                              struct VnlwBipartite **out);

/**
 * Kernel from row-major real and imaginary parts of length `len =
 * n_points²` on the grid of `h`. Wall rows and columns are zeroed; the
 * kernel is not renormalized.
 *
 * # Safety
 * `h` must be a live handle; `re` and `im` must each hold `len` doubles.
 */
enum VnlwStatus vnlw_bipartite_from_kernel(const struct VnlwHamiltonian *h,
                                           const double *re,
                                           const double *im,
                                           size_t len,
                                           struct VnlwBipartite **out);

/**
 * # Safety
 * `psi` must be NULL or a handle not yet freed.
 */
void vnlw_bipartite_free(struct VnlwBipartite *psi);

/**
 * Copies the kernel out in the row-major layout of
 * [`vnlw_bipartite_from_kernel`].
 *
 * # Safety
 * `psi` must be a live handle; `re` and `im` must each hold `len` doubles.
 */
enum VnlwStatus vnlw_bipartite_kernel(const struct VnlwBipartite *psi,
                                      double *re,
                                      double *im,
                                      size_t len);

/**
 * `‖Ψ‖²`
 *
 * # Safety
 * `psi` must be a live handle; `out` must be writable.
 */
enum VnlwStatus vnlw_bipartite_norm(const struct VnlwBipartite *psi, double *out);

/**
 * Evolves `psi` in place by `steps` steps of `dt` under `h`.
 *
 * # Safety
 * `psi` and `h` must be live handles.
 */
enum VnlwStatus vnlw_bipartite_propagate(struct VnlwBipartite *psi,
                                         const struct VnlwHamiltonian *h,
                                         double dt,
                                         size_t steps,
                                         enum VnlwMethod method);

/**
 * Entanglement entropy of a normalized kernel.
 *
 * # Safety
 * `psi` must be a live handle; `out` must be writable.
 */
enum VnlwStatus vnlw_bipartite_entropy(const struct VnlwBipartite *psi, double *out);

/**
 * Position density `Σ_j |Ψ_ij|² dx` (`n_points` values).
 *
 * # Safety
 * `psi` must be a live handle; `out` must hold `len` doubles.
 */
enum VnlwStatus vnlw_bipartite_position_density(const struct VnlwBipartite *psi,
                                                double *out,
                                                size_t len);

/**
 * Outcome probabilities `p_m` and energy changes `ΔE_m` over the levels of
 * `e` (`k` values each) plus the weight outside the basis.
 *
 * # Safety
 * `psi` and `e` must be live handles; `p` and `delta_e` must hold `len`
 * doubles; `residual` must be writable.
 */
enum VnlwStatus vnlw_collapse_statistics(const struct VnlwBipartite *psi,
                                         const struct VnlwEigenSystem *e,
                                         double *p,
                                         double *delta_e,
                                         size_t len,
                                         double *residual);

/**
 * Runs the scenario(s) of a JSON config document and returns the reports
 * as a JSON array in `*out` (release with [`vnlw_string_free`]). Relative
 * paths in the config resolve against the working directory.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 */
enum VnlwStatus vnlw_run_scenario_json(const char *config_json, char **out);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a string from [`vnlw_run_scenario_json`] not yet freed.
 */
void vnlw_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VNLW_H */
