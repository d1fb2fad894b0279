#ifndef SCATMEDIUM_H
#define SCATMEDIUM_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes.
typedef enum SmStatus {
  SM_STATUS_OK = 0,
  SM_STATUS_NULL_POINTER = 1,
  SM_STATUS_INVALID_INPUT = 2,
  SM_STATUS_MESH = 3,
  SM_STATUS_NUMERICAL = 4,
  SM_STATUS_REGIME = 5,
  SM_STATUS_IO = 6,
  SM_STATUS_PANIC = 7,
} SmStatus;

// Boundary condition on every body of an ensemble.
typedef enum SmBoundary {
  SM_BOUNDARY_DIRICHLET = 0,
  SM_BOUNDARY_NEUMANN = 1,
  SM_BOUNDARY_IMPEDANCE = 2,
} SmBoundary;

// Bodies plus the incident wave.
typedef struct SmEnsemble SmEnsemble;

// Closed triangulated surface.
typedef struct SmMesh SmMesh;

// Solved discrete field.
typedef struct SmSolution SmSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buffer` (NUL-terminated,
// truncated to `len`). Returns the full message length.
//
// # Safety
// `buffer` must be null or valid for `len` bytes.
size_t sm_last_error_message(char *buffer, size_t len);

// Icosphere of the given radius and refinement level.
//
// # Safety
// `out` must be valid for writes.
enum SmStatus sm_mesh_sphere(double radius, uint32_t refinement, struct SmMesh **out);

// Loads an OFF mesh.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid for writes.
enum SmStatus sm_mesh_load(const char *path, struct SmMesh **out);

// # Safety
// `mesh` must come from `sm_mesh_*` and not be used afterwards.
void sm_mesh_free(struct SmMesh *mesh);

// Triangle count, volume and area of a mesh.
//
// # Safety
// `mesh` must be a live handle; the out-pointers must be valid or null.
enum SmStatus sm_mesh_info(const struct SmMesh *mesh,
                           size_t *triangles,
                           double *volume,
                           double *area);

// Capacitance, `α⁽ⁿ⁾(γ)` and `β⁽ⁿ⁾` of a body. Tensors are written row-major
// into 9-element arrays; `alpha` and `beta` may be null.
//
// # Safety
// `mesh` must be a live handle; non-null outputs must be valid for writes.
enum SmStatus sm_polarizability(const struct SmMesh *mesh,
                                double gamma,
                                size_t order,
                                double *capacitance,
                                double *alpha,
                                double *beta);

// Empty ensemble in the box `[min, max]` lit by `e^{ik direction·x}`.
//
// # Safety
// `direction`, `min`, `max` must point to 3 doubles; `out` must be valid.
enum SmStatus sm_ensemble_new(enum SmBoundary boundary,
                              double wavenumber,
                              const double *direction,
                              const double *min,
                              const double *max,
                              struct SmEnsemble **out);

// # Safety
// `ensemble` must come from `sm_ensemble_new` and not be used afterwards.
void sm_ensemble_free(struct SmEnsemble *ensemble);

// Adds a body with explicit properties; `beta` is row-major (9 doubles).
//
// # Safety
// `ensemble` must be a live handle; `position` 3 and `beta` 9 doubles.
enum SmStatus sm_ensemble_add_body(struct SmEnsemble *ensemble,
                                   const double *position,
                                   double capacitance,
                                   double volume,
                                   double area,
                                   const double *beta,
                                   double h);

// Adds an analytic sphere of radius `radius` (`C = 4πa`, `β = −3/2 I`).
//
// # Safety
// `ensemble` must be a live handle; `position` must point to 3 doubles.
enum SmStatus sm_ensemble_add_sphere(struct SmEnsemble *ensemble,
                                     const double *position,
                                     double radius,
                                     double h);

// # Safety
// `ensemble` must be a live handle; `len` valid for writes.
enum SmStatus sm_ensemble_len(const struct SmEnsemble *ensemble, size_t *len);

// Solves the self-consistent system for the ensemble's boundary kind.
//
// # Safety
// `ensemble` must be a live handle; `out` must be valid for writes.
enum SmStatus sm_solve(const struct SmEnsemble *ensemble, struct SmSolution **out);

// # Safety
// `solution` must come from `sm_solve` and not be used afterwards.
void sm_solution_free(struct SmSolution *solution);

// Relative residual of the linear solve.
//
// # Safety
// `solution` must be a live handle; `residual` valid for writes.
enum SmStatus sm_solution_residual(const struct SmSolution *solution, double *residual);

// Total field at `count` points (`3·count` doubles); writes `2·count`
// doubles as interleaved real and imaginary parts.
//
// # Safety
// Arrays must hold the stated number of doubles.
enum SmStatus sm_solution_evaluate(const struct SmSolution *solution,
                                   const double *points,
                                   size_t count,
                                   double *values);

// Far-field amplitude in `count` directions, same layout as
// [`sm_solution_evaluate`].
//
// # Safety
// Arrays must hold the stated number of doubles.
enum SmStatus sm_solution_far_field(const struct SmSolution *solution,
                                    const double *directions,
                                    size_t count,
                                    double *values);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCATMEDIUM_H */
