#ifndef DSLIST_H
#define DSLIST_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DS_OK 0

#define DS_ERR_NULL 1

#define DS_ERR_INVALID 2

#define DS_ERR_BUDGET 3

#define DS_ERR_PRECONDITION 4

#define DS_ERR_NOT_CONVERGED 5

#define DS_ERR_STAGE 6

#define DS_ERR_IO 7

#define DS_ERR_PANIC 8

#define DS_CORRUPT_RANDOM 0

#define DS_CORRUPT_ADVERSARIAL 1

typedef struct DsCode DsCode;

typedef struct DsReceived DsReceived;

typedef struct DsReport DsReport;

typedef struct DsSampler DsSampler;

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next call into the library on the same thread.
 */
const char *ds_last_error(void);

/**
 * Frees a string returned by the library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ds_string_free(char *s);

/**
 * Complete complex on `n` points with `m1`- and `m2`-subsets.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t ds_sampler_complete(size_t n, size_t m1, size_t m2, struct DsSampler **out);

/**
 * Parses a sampler file.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
int32_t ds_sampler_from_json(const char *json, struct DsSampler **out);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ds_sampler_free(struct DsSampler *s);

/**
 * Number of coordinates, or 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
size_t ds_sampler_n(const struct DsSampler *s);

/**
 * Number of middle copies, the length of a received word.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
size_t ds_sampler_middle_count(const struct DsSampler *s);

/**
 * Random linear `[n, k]` code decoding up to `eps0 * n` errors.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t ds_code_random_linear(size_t n, size_t k, double eps0, uint64_t seed, struct DsCode **out);

/**
 * Parses a code description such as `{"kind": "repetition", "n": 9, "eps0": 0.3}`.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
int32_t ds_code_from_json(const char *json, struct DsCode **out);

/**
 * # Safety
 * `c` must come from this library and not have been freed.
 */
void ds_code_free(struct DsCode *c);

/**
 * Message length of the code, or 0 for a null handle.
 *
 * # Safety
 * `c` must be null or a live handle.
 */
size_t ds_code_k(const struct DsCode *c);

/**
 * Encodes `len` bits (one byte each, 0 or 1). With a code the bits are a
 * message; with a null code they are the word itself.
 *
 * # Safety
 * `bits_ptr` must hold `len` bytes; handles must be live or, for `code`, null.
 */
int32_t ds_encode(const struct DsSampler *sampler,
                  const struct DsCode *code,
                  const uint8_t *bits_ptr,
                  size_t len,
                  struct DsReceived **out);

/**
 * Keeps an `agreement` fraction of copies and corrupts the rest with
 * `DS_CORRUPT_RANDOM` or `DS_CORRUPT_ADVERSARIAL`.
 *
 * # Safety
 * `received` must be live and `out` valid.
 */
int32_t ds_corrupt(const struct DsReceived *received,
                   double agreement,
                   int32_t mode,
                   uint64_t seed,
                   struct DsReceived **out);

/**
 * Parses a received-word file against the sampler's middle layer.
 *
 * # Safety
 * `json` must be a nul-terminated string; handles must be live.
 */
int32_t ds_received_from_json(const struct DsSampler *sampler,
                              const char *json,
                              struct DsReceived **out);

/**
 * Received word as JSON; free with `ds_string_free`. Null on failure.
 *
 * # Safety
 * Handles must be live.
 */
char *ds_received_to_json(const struct DsSampler *sampler, const struct DsReceived *received);

/**
 * # Safety
 * `r` must come from this library and not have been freed.
 */
void ds_received_free(struct DsReceived *r);

/**
 * Runs the decoder. A null `code` gives approximate decoding. `config_json`
 * holds decoder settings as JSON; when null, `epsilon`, `epsilon0` and
 * `seed` are used with defaults for the rest.
 *
 * # Safety
 * Handles must be live or null where allowed; `config_json` null or a
 * nul-terminated string.
 */
int32_t ds_decode(const struct DsSampler *sampler,
                  const struct DsCode *code,
                  const struct DsReceived *received,
                  const char *config_json,
                  double epsilon,
                  double epsilon0,
                  uint64_t seed,
                  struct DsReport **out);

/**
 * # Safety
 * `r` must come from this library and not have been freed.
 */
void ds_report_free(struct DsReport *r);

/**
 * Number of output words, or 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
size_t ds_report_output_count(const struct DsReport *r);

/**
 * Number of recorded stage failures, or 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
size_t ds_report_stage_failures(const struct DsReport *r);

/**
 * Copies output word `index` into `buf` (one byte per bit) and its
 * agreement into `agreement` when that is non-null.
 *
 * # Safety
 * `buf` must hold `len` bytes; `r` must be live.
 */
int32_t ds_report_output(const struct DsReport *r,
                         size_t index,
                         uint8_t *buf,
                         size_t len,
                         double *agreement);

/**
 * Full report as JSON; free with `ds_string_free`. Null on failure.
 *
 * # Safety
 * `r` must be live.
 */
char *ds_report_to_json(const struct DsReport *r);

#endif  /* DSLIST_H */
