#ifndef STRUCTDM_H
#define STRUCTDM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SdmStatus {
  SDM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SDM_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not UTF-8.
   */
  SDM_STATUS_INVALID_UTF8 = 2,
  SDM_STATUS_IO = 3,
  SDM_STATUS_PARSE = 4,
  /**
   * Bad value: unknown domain, slot or policy kind, an invalid act, a bad config.
   */
  SDM_STATUS_INVALID_ARGUMENT = 5,
  SDM_STATUS_CHECKPOINT = 6,
  /**
   * The library panicked; the handle involved should be dropped.
   */
  SDM_STATUS_INTERNAL = 7,
} SdmStatus;

/**
 * Loaded ontology.
 */
typedef struct SdmOntology SdmOntology;

/**
 * A dialogue policy.
 */
typedef struct SdmPolicy SdmPolicy;

/**
 * An interactive dialogue in which the caller plays the user.
 */
typedef struct SdmSession SdmSession;

/**
 * Evaluation summary over a batch of simulated dialogues.
 */
typedef struct SdmMetrics {
  size_t dialogues;
  double inform_precision;
  double inform_recall;
  double inform_f1;
  double book_rate;
  double success;
  double complete;
  double avg_turns_success;
  double avg_turns_all;
  double avg_reward;
} SdmMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread ("" after a success).
 * Valid until the next call into the library on the same thread.
 */
const char *sdm_last_error(void);

/**
 * Library version, static.
 */
const char *sdm_version(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void sdm_string_free(char *s);

/**
 * The bundled seven-domain ontology.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SdmStatus sdm_ontology_bundled(struct SdmOntology **out);

/**
 * Loads an ontology JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SdmStatus sdm_ontology_load(const char *path, struct SdmOntology **out);

/**
 * A new ontology with only the comma-separated `domains`, in that order.
 *
 * # Safety
 * `ontology` must be a live handle, `domains` a NUL-terminated string and `out` a valid pointer.
 */
enum SdmStatus sdm_ontology_restrict(const struct SdmOntology *ontology,
                                     const char *domains,
                                     struct SdmOntology **out);

/**
 * Number of domains (0 for a null handle).
 *
 * # Safety
 * `ontology` must be a live handle or null.
 */
size_t sdm_ontology_domain_count(const struct SdmOntology *ontology);

/**
 * # Safety
 * `ontology` must come from this library or be null; it is invalid afterwards.
 */
void sdm_ontology_free(struct SdmOntology *ontology);

/**
 * A freshly initialised policy. `kind` is one of fnn, fnn-ref, hfnn, hgnn, uhgnn.
 *
 * # Safety
 * `ontology` must be a live handle, `kind` a NUL-terminated string and `out` a valid pointer.
 */
enum SdmStatus sdm_policy_new(const struct SdmOntology *ontology,
                              const char *kind,
                              uint64_t seed,
                              struct SdmPolicy **out);

/**
 * Loads a checkpoint against `ontology`, or against the bundled ontology restricted
 * to the checkpoint's recorded domains when `ontology` is null.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `ontology` a live handle or null, `out` a valid pointer.
 */
enum SdmStatus sdm_policy_load(const char *path,
                               const struct SdmOntology *ontology,
                               struct SdmPolicy **out);

/**
 * Writes a checkpoint (without optimiser state).
 *
 * # Safety
 * `policy` must be a live handle and `path` a NUL-terminated string.
 */
enum SdmStatus sdm_policy_save(const struct SdmPolicy *policy, const char *path);

/**
 * Number of scalar parameters (0 for a null handle).
 *
 * # Safety
 * `policy` must be a live handle or null.
 */
size_t sdm_policy_param_count(const struct SdmPolicy *policy);

/**
 * # Safety
 * `policy` must come from this library or be null; it is invalid afterwards.
 */
void sdm_policy_free(struct SdmPolicy *policy);

/**
 * Greedy evaluation of `policy` on `dialogues` simulated users drawn from `seed`.
 *
 * # Safety
 * `policy` must be a live handle and `out` a valid pointer.
 */
enum SdmStatus sdm_evaluate_policy(const struct SdmPolicy *policy,
                                   size_t dialogues,
                                   uint64_t seed,
                                   size_t max_goal_domains,
                                   struct SdmMetrics *out);

/**
 * Same as `sdm_evaluate_policy` for the handcrafted oracle.
 *
 * # Safety
 * `ontology` must be a live handle and `out` a valid pointer.
 */
enum SdmStatus sdm_evaluate_oracle(const struct SdmOntology *ontology,
                                   size_t dialogues,
                                   uint64_t seed,
                                   size_t max_goal_domains,
                                   struct SdmMetrics *out);

/**
 * A session answered by the oracle.
 *
 * # Safety
 * `ontology` must be a live handle and `out` a valid pointer.
 */
enum SdmStatus sdm_session_new_oracle(const struct SdmOntology *ontology, struct SdmSession **out);

/**
 * A session answered greedily by a copy of `policy`.
 *
 * # Safety
 * `policy` must be a live handle and `out` a valid pointer.
 */
enum SdmStatus sdm_session_new_policy(const struct SdmPolicy *policy, struct SdmSession **out);

/**
 * Plays one user turn, e.g. `inform[restaurant.food=italian]; request[restaurant.phone]`.
 *
 * On success `*reply` receives a JSON object with `system` (list of act strings),
 * `belief` and `verdict` (null, or `{"success":..,"complete":..}` after `bye`).
 * Free it with `sdm_string_free`.
 *
 * # Safety
 * `session` must be a live handle, `line` a NUL-terminated string and `reply` a valid pointer.
 */
enum SdmStatus sdm_session_send(struct SdmSession *session, const char *line, char **reply);

/**
 * Forgets the current dialogue.
 *
 * # Safety
 * `session` must be a live handle or null.
 */
void sdm_session_reset(struct SdmSession *session);

/**
 * # Safety
 * `session` must come from this library or be null; it is invalid afterwards.
 */
void sdm_session_free(struct SdmSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRUCTDM_H */
