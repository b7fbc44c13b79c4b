#ifndef SEE_H
#define SEE_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SeeStatus {
  SEE_STATUS_OK = 0,
  SEE_STATUS_NULL_POINTER = 1,
  SEE_STATUS_INVALID_UTF8 = 2,
  SEE_STATUS_CONFIG = 3,
  SEE_STATUS_INVALID_MODEL = 4,
  SEE_STATUS_INVALID_ARGUMENT = 5,
  SEE_STATUS_BUDGET_EXCEEDED = 6,
  SEE_STATUS_NO_CONVERGENCE = 7,
  SEE_STATUS_NO_THRESHOLD = 8,
  SEE_STATUS_NO_SELECTION = 9,
  SEE_STATUS_OUT_OF_RANGE = 10,
  SEE_STATUS_INTERNAL = 11,
} SeeStatus;

/**
 * A certified set of pure stationary equilibria.
 */
typedef struct SeeEquilibria SeeEquilibria;

/**
 * A model with its viability set and run settings.
 */
typedef struct SeeModel SeeModel;

/**
 * Output of the refinement pipeline.
 */
typedef struct SeeReport SeeReport;

/**
 * Set sizes along the refinement chain.
 */
typedef struct SeeCounts {
  size_t equilibria;
  size_t viable;
  size_t renegotiation_proof;
  bool selected;
} SeeCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *see_last_error(void);

/**
 * Library version, a static string.
 */
const char *see_version(void);

/**
 * Builds a model from the text of a run configuration.
 *
 * # Safety
 * `toml` must be a nul-terminated string and `out` a valid pointer.
 */
enum SeeStatus see_model_from_toml(const char *toml, struct SeeModel **out);

/**
 * The three-state exploitation game at `discount`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SeeStatus see_model_toy3(double discount, struct SeeModel **out);

/**
 * # Safety
 * `model` must be null or a handle from a `see_model_*` constructor, not yet freed.
 */
void see_model_free(struct SeeModel *model);

/**
 * Number of states, 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t see_model_n_states(const struct SeeModel *model);

/**
 * Whether `state` belongs to the viability set.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
bool see_model_is_viable(const struct SeeModel *model, size_t state);

/**
 * Enumerates every pure stationary equilibrium, certified at the configured tolerance
 * and within the configured profile budget.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum SeeStatus see_enumerate(const struct SeeModel *model, struct SeeEquilibria **out);

/**
 * # Safety
 * `set` must be null or a live handle.
 */
size_t see_equilibria_len(const struct SeeEquilibria *set);

/**
 * Copies the values of member `k` into `w_x` and `w_e`, each of length `n`, which
 * must equal the number of states.
 *
 * # Safety
 * `set` must be a live handle; `w_x` and `w_e` must point to `n` writable doubles.
 */
enum SeeStatus see_equilibria_values(const struct SeeEquilibria *set,
                                     size_t k,
                                     double *w_x,
                                     double *w_e,
                                     size_t n);

/**
 * Leader action index of member `k` at `state`.
 *
 * # Safety
 * `set` must be a live handle and `action` a valid pointer.
 */
enum SeeStatus see_equilibria_leader_action(const struct SeeEquilibria *set,
                                            size_t k,
                                            size_t state,
                                            size_t *action);

/**
 * Largest one-shot deviation gain of member `k`.
 *
 * # Safety
 * `set` must be a live handle and `gain` a valid pointer.
 */
enum SeeStatus see_equilibria_max_gain(const struct SeeEquilibria *set, size_t k, double *gain);

/**
 * # Safety
 * `set` must be null or a handle from [`see_enumerate`], not yet freed.
 */
void see_equilibria_free(struct SeeEquilibria *set);

/**
 * Runs the refinement pipeline with the settings of the model's configuration.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum SeeStatus see_refine(const struct SeeModel *model, struct SeeReport **out);

/**
 * # Safety
 * `report` must be a live handle and `counts` a valid pointer.
 */
enum SeeStatus see_report_counts(const struct SeeReport *report, struct SeeCounts *counts);

/**
 * Penalty applied before equilibrium computation (0 when unpenalized).
 *
 * # Safety
 * `report` must be null or a live handle.
 */
double see_report_penalty(const struct SeeReport *report);

/**
 * Values of the selected profile; [`SeeStatus::NoSelection`] when nothing was selected.
 *
 * # Safety
 * `report` must be a live handle; `w_x` and `w_e` must point to `n` writable doubles.
 */
enum SeeStatus see_report_selected_values(const struct SeeReport *report,
                                          double *w_x,
                                          double *w_e,
                                          size_t n);

/**
 * The full report as JSON; release with [`see_string_free`]. Null on failure.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *see_report_to_json(const struct SeeReport *report);

/**
 * # Safety
 * `report` must be null or a handle from [`see_refine`], not yet freed.
 */
void see_report_free(struct SeeReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void see_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEE_H */
