#ifndef SPLINE_OT_H
#define SPLINE_OT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SotStatus {
  SOT_STATUS_OK = 0,
  SOT_STATUS_NULL_POINTER = 1,
  SOT_STATUS_PARSE = 2,
  SOT_STATUS_GEOMETRY = 3,
  SOT_STATUS_SOLVER = 4,
  SOT_STATUS_DENSITY = 5,
  SOT_STATUS_IO = 6,
  SOT_STATUS_INVALID_ARGUMENT = 7,
  SOT_STATUS_PANIC = 99,
} SotStatus;

/**
 * Triangulation handle.
 */
typedef struct SotMesh SotMesh;

/**
 * Solved potential; for transport solves also the map's frame shifts.
 */
typedef struct SotSolution SotSolution;

/**
 * `double f(double x, double y, void *user)`.
 */
typedef double (*SotScalarFn)(double x, double y, void *user);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *sot_last_error_message(void);

/**
 * Library version, static storage.
 */
const char *sot_version(void);

/**
 * Parses a mesh from the text of Triangle `.node` and `.ele` files.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be writable.
 */
enum SotStatus sot_mesh_parse(const char *node_text, const char *ele_text, struct SotMesh **out);

/**
 * Builtin domain mesh (`square`, `unit-square`, `disk`, `L`, `moon`, ...).
 *
 * # Safety
 * `name` must be NUL-terminated; `out` must be writable.
 */
enum SotStatus sot_mesh_builtin(const char *name, size_t resolution, struct SotMesh **out);

/**
 * Vertex and triangle counts.
 *
 * # Safety
 * `mesh` must come from this library; outputs must be writable.
 */
enum SotStatus sot_mesh_counts(const struct SotMesh *mesh, size_t *n_vertices, size_t *n_triangles);

/**
 * # Safety
 * `mesh` must come from this library or be null; it is invalid afterwards.
 */
void sot_mesh_free(struct SotMesh *mesh);

/**
 * Solves `−Δu = rhs` with `u = boundary` on the mesh boundary.
 *
 * # Safety
 * `mesh` must come from this library; callbacks must be thread-safe.
 */
enum SotStatus sot_poisson(const struct SotMesh *mesh,
                           size_t degree,
                           size_t smoothness,
                           SotScalarFn rhs,
                           SotScalarFn boundary,
                           void *user,
                           struct SotSolution **out);

/**
 * Subharmonic iteration for `det D²u = f/g` with constant `g` and
 * Dirichlet data; `f_lower ≤ f ≤ f_upper` on the domain.
 *
 * # Safety
 * `mesh` must come from this library; callbacks must be thread-safe.
 */
enum SotStatus sot_mae_dirichlet(const struct SotMesh *mesh,
                                 size_t degree,
                                 size_t smoothness,
                                 SotScalarFn f,
                                 double f_lower,
                                 double f_upper,
                                 double g,
                                 SotScalarFn boundary,
                                 void *user,
                                 size_t iterations,
                                 struct SotSolution **out);

/**
 * Transport from the mesh's domain onto the star-shaped polygon given by
 * `n_target` interleaved `x, y` pairs. Densities use the descriptor strings
 * of the command line (`const:1`, `gauss:a,b,t,s`, `builtin:name`); a null
 * `g` selects the constant that balances the masses.
 *
 * # Safety
 * `mesh` must come from this library; `target_xy` must hold `2 n_target` doubles.
 */
enum SotStatus sot_transport(const struct SotMesh *mesh,
                             const double *target_xy,
                             size_t n_target,
                             const char *f,
                             const char *g,
                             size_t degree,
                             size_t smoothness,
                             struct SotSolution **out);

/**
 * Value of the potential and its gradient at `(x, y)`.
 *
 * # Safety
 * `sol` must come from this library; outputs may be null to skip them.
 */
enum SotStatus sot_solution_eval(const struct SotSolution *sol,
                                 double x,
                                 double y,
                                 double *value,
                                 double *gradient);

/**
 * Image of `(x, y)` under the transport map, written to `out_xy[0..2]`.
 *
 * # Safety
 * `sol` must come from this library; `out_xy` must hold two doubles.
 */
enum SotStatus sot_solution_map(const struct SotSolution *sol, double x, double y, double *out_xy);

/**
 * Run report as JSON, owned by the solution.
 *
 * # Safety
 * `sol` must come from this library or be null.
 */
const char *sot_solution_report_json(const struct SotSolution *sol);

/**
 * # Safety
 * `sol` must come from this library or be null; it is invalid afterwards.
 */
void sot_solution_free(struct SotSolution *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLINE_OT_H */
