#ifndef PROXEKIT_H
#define PROXEKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PxStatus {
  PX_STATUS_OK = 0,
  PX_STATUS_NULL_POINTER = 1,
  PX_STATUS_INVALID_UTF8 = 2,
  PX_STATUS_INVALID_INPUT = 3,
  PX_STATUS_NUMERICAL = 4,
  PX_STATUS_IO = 5,
  PX_STATUS_PANIC = 6,
} PxStatus;

/**
 * An `N³` occupancy grid.
 */
typedef struct PxGrid PxGrid;

/**
 * A parsed primitive set.
 */
typedef struct PxProxy PxProxy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Free with
 * [`px_string_free`].
 */
char *px_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or come from this library and not be freed twice.
 */
void px_string_free(char *s);

/**
 * Parses a proxy from JSON text.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` a valid pointer.
 */
enum PxStatus px_proxy_load_json(const char *json, struct PxProxy **out);

/**
 * Serializes a proxy to JSON. Free the result with [`px_string_free`].
 *
 * # Safety
 * `proxy` must be a live handle; `out` a valid pointer.
 */
enum PxStatus px_proxy_save_json(const struct PxProxy *proxy, char **out);

/**
 * Applies an edit script, producing a new proxy.
 *
 * # Safety
 * `proxy` must be a live handle, `script` a nul-terminated string and
 * `out` a valid pointer.
 */
enum PxStatus px_proxy_apply_script(const struct PxProxy *proxy,
                                    const char *script,
                                    struct PxProxy **out);

/**
 * Number of primitives, or 0 for a null handle.
 *
 * # Safety
 * `proxy` must be null or a live handle.
 */
uintptr_t px_proxy_len(const struct PxProxy *proxy);

/**
 * # Safety
 * `proxy` must be null or a handle not yet freed.
 */
void px_proxy_free(struct PxProxy *proxy);

/**
 * Implicit value of the primitive `params` (11 numbers: scale, shape,
 * translation, rotation) at `point` (3 numbers).
 *
 * # Safety
 * `params` must point to 11 doubles, `point` to 3, `out` to one.
 */
enum PxStatus px_sq_implicit_value(const double *params, const double *point, double *out);

/**
 * Decomposes `count` points (`3 * count` doubles, xyz interleaved) into at
 * most `k` superquadrics.
 *
 * # Safety
 * `points` must hold `3 * count` doubles; `out` must be valid.
 */
enum PxStatus px_fit_decompose(const double *points,
                               uintptr_t count,
                               uintptr_t k,
                               uint64_t seed,
                               struct PxProxy **out);

/**
 * Voxelizes every primitive of `proxy` on an `n³` grid.
 *
 * # Safety
 * `proxy` must be a live handle; `out` a valid pointer.
 */
enum PxStatus px_grid_voxelize_proxy(const struct PxProxy *proxy, uintptr_t n, struct PxGrid **out);

/**
 * Cells per axis, or 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
uintptr_t px_grid_resolution(const struct PxGrid *grid);

/**
 * Occupied cell count, or 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
uintptr_t px_grid_count(const struct PxGrid *grid);

/**
 * Copies the `n³` cells (0 or 1, x-fastest) into `buf`.
 *
 * # Safety
 * `grid` must be a live handle and `buf` hold `len` bytes.
 */
enum PxStatus px_grid_get_cells(const struct PxGrid *grid, uint8_t *buf, uintptr_t len);

/**
 * # Safety
 * `grid` must be null or a handle not yet freed.
 */
void px_grid_free(struct PxGrid *grid);

/**
 * Intersection over union; 1 when both grids are empty.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be valid.
 */
enum PxStatus px_grid_iou(const struct PxGrid *a, const struct PxGrid *b, double *out);

/**
 * Symmetric mean squared nearest-neighbor distance between two point sets.
 *
 * # Safety
 * `a` must hold `3 * na` doubles, `b` `3 * nb`, and `out` must be valid.
 */
enum PxStatus px_chamfer(const double *a, uintptr_t na, const double *b, uintptr_t nb, double *out);

/**
 * Runs the edit pipeline with default settings at resolution `n` and
 * writes every stage file into `out_dir`. `iou_out` receives the output's
 * IoU against the voxelized input and may be null.
 *
 * # Safety
 * Path arguments must be nul-terminated strings; `iou_out` null or valid.
 */
enum PxStatus px_pipeline_run(const char *mesh_path,
                              const char *proxy_path,
                              const char *script_path,
                              const char *out_dir,
                              uintptr_t n,
                              double *iou_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROXEKIT_H */
