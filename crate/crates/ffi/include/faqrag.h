#ifndef FAQRAG_H
#define FAQRAG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum FaqragStatus {
  FAQRAG_STATUS_OK = 0,
  FAQRAG_STATUS_NULL_POINTER = 1,
  FAQRAG_STATUS_INVALID_UTF8 = 2,
  FAQRAG_STATUS_INVALID_ARGUMENT = 3,
  FAQRAG_STATUS_CONFIG = 4,
  FAQRAG_STATUS_CORPUS = 5,
  FAQRAG_STATUS_PROVIDER = 6,
  FAQRAG_STATUS_NOT_FOUND = 7,
  FAQRAG_STATUS_PANIC = 8,
} FaqragStatus;

/**
 * Opaque engine handle.
 */
typedef struct FaqragEngine FaqragEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Engine over the bundled corpus with offline mock providers.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum FaqragStatus faqrag_engine_new_mock(struct FaqragEngine **out);

/**
 * Engine from a TOML config file; `FAQRAG_*` environment overrides apply.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FaqragStatus faqrag_engine_from_config(const char *path, struct FaqragEngine **out);

/**
 * # Safety
 * `engine` must come from one of the constructors, or be null.
 */
void faqrag_engine_free(struct FaqragEngine *engine);

/**
 * Answers a query. Writes the response as a JSON object to `out_json`.
 *
 * # Safety
 * `engine` must be live, `query` NUL-terminated, `out_json` valid.
 */
enum FaqragStatus faqrag_answer(const struct FaqragEngine *engine,
                                const char *query,
                                char **out_json);

/**
 * `n` distinct FAQs as a JSON array of `{id, question, language}`.
 *
 * # Safety
 * `engine` must be live and `out_json` valid.
 */
enum FaqragStatus faqrag_sample_faqs(const struct FaqragEngine *engine,
                                     size_t n,
                                     uint64_t seed,
                                     char **out_json);

/**
 * The stored answer for an FAQ id, verbatim.
 *
 * # Safety
 * `engine` must be live, `id` NUL-terminated, `out` valid.
 */
enum FaqragStatus faqrag_lookup_answer(const struct FaqragEngine *engine,
                                       const char *id,
                                       char **out);

/**
 * Writes `"en"`, `"bn"` or `"banglish"`.
 *
 * # Safety
 * `text` must be NUL-terminated and `out_code` valid.
 */
enum FaqragStatus faqrag_detect_language(const char *text, char **out_code);

/**
 * Cosine similarity of two equal-length vectors.
 *
 * # Safety
 * `a` and `b` must point to `len` floats; `out` must be valid.
 */
enum FaqragStatus faqrag_cosine(const float *a, const float *b, size_t len, double *out);

/**
 * Message for the last failed call on this thread, or "" after a success.
 * Valid until the next library call on the same thread; do not free.
 */
const char *faqrag_last_error_message(void);

/**
 * # Safety
 * `s` must be a string returned by this library, or null.
 */
void faqrag_string_free(char *s);

/**
 * Library version, static storage.
 */
const char *faqrag_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAQRAG_H */
