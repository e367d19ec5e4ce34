#ifndef THICKLAB_H
#define THICKLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define TL_OK 0

#define TL_ERR_NULL -1

#define TL_ERR_UTF8 -2

#define TL_ERR_PARSE -3

#define TL_ERR_INVALID -4

#define TL_ERR_COMPUTE -5

#define TL_ERR_PANIC -6

/**
 * A parsed expression with fixed arity.
 */
typedef struct TlExpr TlExpr;

/**
 * A Cantor set description.
 */
typedef struct TlSpec TlSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a set from JSON or an alias such as `C` or `F1(7)`.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
int32_t tl_spec_from_json(const char *json, struct TlSpec **out);

/**
 * # Safety
 * `spec` must come from `tl_spec_from_json` and not be freed twice.
 */
void tl_spec_free(struct TlSpec *spec);

/**
 * Parses an expression over the default variable names for `arity`.
 *
 * # Safety
 * `src` must be a nul-terminated string; `out` must be writable.
 */
int32_t tl_expr_parse(const char *src, size_t arity, struct TlExpr **out);

/**
 * # Safety
 * `expr` must come from `tl_expr_parse` and not be freed twice.
 */
void tl_expr_free(struct TlExpr *expr);

/**
 * Thickness report as JSON.
 *
 * # Safety
 * `spec` must be a live handle; `out_json` must be writable.
 */
int32_t tl_thickness_json(const struct TlSpec *spec, uint32_t depth, char **out_json);

/**
 * Runs the derivative-ratio check. `out_verdict` receives 0 (pass),
 * 1 (fail) or 2 (inconclusive); `out_json` may be null.
 *
 * # Safety
 * `specs` must point to `n` live handles.
 */
int32_t tl_check(const struct TlExpr *expr,
                 const struct TlSpec *const *specs,
                 size_t n,
                 int32_t *out_verdict,
                 char **out_json);

/**
 * Image enclosure at `depth` as JSON. `budget` 0 means the default.
 *
 * # Safety
 * `specs` must point to `n` live handles; `out_json` must be writable.
 */
int32_t tl_cover_json(const struct TlExpr *expr,
                      const struct TlSpec *const *specs,
                      size_t n,
                      uint32_t depth,
                      uint64_t budget,
                      char **out_json);

/**
 * Searches for a certificate that `z` (a rational or decimal string) is
 * not attained. `out_certified` receives 1 or 0; `out_json` may be null.
 *
 * # Safety
 * `specs` must point to `n` live handles; `z` must be a nul-terminated
 * string.
 */
int32_t tl_certify(const struct TlExpr *expr,
                   const struct TlSpec *const *specs,
                   size_t n,
                   const char *z,
                   uint32_t max_depth,
                   int32_t *out_certified,
                   char **out_json);

/**
 * Runs a named preset. `out_passed` receives 1 or 0; `out_json` may be
 * null.
 *
 * # Safety
 * `name` must be a nul-terminated string.
 */
int32_t tl_reproduce(const char *name, int32_t *out_passed, char **out_json);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void tl_string_free(char *s);

/**
 * Message for the last failed call on this thread; empty after success.
 * Valid until the next call on the same thread.
 */
const char *tl_last_error_message(void);

const char *tl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THICKLAB_H */
