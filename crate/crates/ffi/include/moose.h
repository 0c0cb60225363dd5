#ifndef MOOSE_H
#define MOOSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MooseStatus {
  MOOSE_STATUS_OK = 0,
  MOOSE_STATUS_NULL_POINTER = 1,
  MOOSE_STATUS_INVALID_UTF8 = 2,
  MOOSE_STATUS_INVALID_ARGUMENT = 3,
  MOOSE_STATUS_NOT_FOUND = 4,
  MOOSE_STATUS_STAGE_MISMATCH = 5,
  MOOSE_STATUS_BACKEND = 6,
  MOOSE_STATUS_CORRUPT = 7,
  MOOSE_STATUS_INCOMPLETE = 8,
  MOOSE_STATUS_PANIC = 9,
} MooseStatus;

typedef enum MooseStage {
  MOOSE_STAGE_EXPLORATORY = 0,
  MOOSE_STAGE_FINE_GRAINED = 1,
} MooseStage;

/**
 * A parsed inspiration corpus.
 */
typedef struct MooseCorpus MooseCorpus;

/**
 * A session together with the model backend it calls.
 */
typedef struct MooseSession MooseSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *moose_version(void);

/**
 * Message for the last failed call on this thread, or null. The caller
 * frees the result with [`moose_string_free`].
 */
char *moose_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void moose_string_free(char *s);

/**
 * Parses a line-delimited corpus (`{id, title, abstract}` per line).
 *
 * # Safety
 * `name` and `jsonl` must be valid C strings; `out` must be writable.
 */
enum MooseStatus moose_corpus_parse(const char *name, const char *jsonl, struct MooseCorpus **out);

/**
 * # Safety
 * `corpus` must be null or a handle from [`moose_corpus_parse`], not yet freed.
 */
void moose_corpus_free(struct MooseCorpus *corpus);

/**
 * Starts a session. `survey` and `blueprint` may be null. `backend` is
 * `live`, `synthetic[:seed]` or `scripted:<path>`. Ids are generated
 * deterministically from `seed`.
 *
 * # Safety
 * String arguments must be valid C strings or null where allowed;
 * `corpus` must be a live handle; `out` must be writable.
 */
enum MooseStatus moose_session_new(const char *question,
                                   const char *survey,
                                   const char *blueprint,
                                   const struct MooseCorpus *corpus,
                                   const char *backend,
                                   uint64_t seed,
                                   struct MooseSession **out);

/**
 * Restores a session from its export, refusing logs that do not replay.
 *
 * # Safety
 * As for [`moose_session_new`].
 */
enum MooseStatus moose_session_restore(const char *export_json,
                                       const struct MooseCorpus *corpus,
                                       const char *backend,
                                       uint64_t seed,
                                       struct MooseSession **out);

/**
 * # Safety
 * `session` must be null or a live handle, not yet freed.
 */
void moose_session_free(struct MooseSession *session);

/**
 * Id of the root node.
 *
 * # Safety
 * `session` must be a live handle; `out` must be writable.
 */
enum MooseStatus moose_session_root(struct MooseSession *session, char **out);

/**
 * Full session export as JSON.
 *
 * # Safety
 * `session` must be a live handle; `out` must be writable.
 */
enum MooseStatus moose_session_export(struct MooseSession *session, char **out);

/**
 * # Safety
 * `session` must be a live handle; `node` and `feedback` valid C strings.
 */
enum MooseStatus moose_session_feedback(struct MooseSession *session,
                                        const char *node,
                                        const char *feedback);

/**
 * # Safety
 * `session` must be a live handle; `node` a valid C string.
 */
enum MooseStatus moose_session_route(struct MooseSession *session,
                                     const char *node,
                                     enum MooseStage target);

/**
 * One exploration round with default settings; writes the new node ids as
 * a JSON array.
 *
 * # Safety
 * `session` must be a live handle; `node` a valid C string; `out` writable.
 */
enum MooseStatus moose_session_explore(struct MooseSession *session, const char *node, char **out);

/**
 * Hierarchical refinement with default settings; writes the final node id.
 * A run that fails part-way is kept in the log and reported as
 * `Incomplete`.
 *
 * # Safety
 * `session` must be a live handle; `node` a valid C string; `out` writable.
 */
enum MooseStatus moose_session_refine(struct MooseSession *session, const char *node, char **out);

/**
 * Checks an exported event log against the protocol grammar.
 *
 * # Safety
 * `export_json` must be a valid C string.
 */
enum MooseStatus moose_validate_export(const char *export_json);

/**
 * Recall of `hypothesis` against a ground-truth entry given as JSON.
 *
 * # Safety
 * String arguments must be valid C strings; `out` must be writable.
 */
enum MooseStatus moose_recall(const char *hypothesis, const char *entry_json, double *out);

/**
 * Writes 1 when `feedback` discloses no 8-token span of the entry, else 0.
 *
 * # Safety
 * String arguments must be valid C strings; `passed` must be writable.
 */
enum MooseStatus moose_leak_check(const char *feedback, const char *entry_json, int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOOSE_H */
