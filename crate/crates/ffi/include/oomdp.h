#ifndef OOMDP_H
#define OOMDP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum OomdpStatus {
  OOMDP_STATUS_OK = 0,
  OOMDP_STATUS_NULL_ARGUMENT = 1,
  OOMDP_STATUS_INVALID_UTF8 = 2,
  OOMDP_STATUS_PARSE_ERROR = 3,
  OOMDP_STATUS_INVALID_ARGUMENT = 4,
  OOMDP_STATUS_RUNTIME_ERROR = 5,
  OOMDP_STATUS_PANIC = 6,
} OomdpStatus;

// A transition-model learner.
typedef struct OomdpLearner OomdpLearner;

// A parsed grid map.
typedef struct OomdpMap OomdpMap;

typedef struct OomdpTrainSummary {
  uint32_t episodes;
  uint32_t last_steps;
  // Nonzero when the last episode delivered without unknown predictions.
  uint8_t last_converged;
  uint32_t mispredictions;
  uint32_t unknown_predictions;
} OomdpTrainSummary;

typedef struct OomdpLocalizeSummary {
  uint32_t updates;
  double final_rmse;
  uint32_t final_particles;
  uint32_t final_modes;
  uint32_t peak_particles;
} OomdpLocalizeSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *oomdp_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void oomdp_string_free(char *s);

// Parses map text.
//
// # Safety
// `text` must be a NUL-terminated string and `out` writable.
enum OomdpStatus oomdp_map_parse(const char *text, struct OomdpMap **out);

// Loads one of the maps shipped with the library by name.
//
// # Safety
// `name` must be a NUL-terminated string and `out` writable.
enum OomdpStatus oomdp_map_bundled(const char *name, struct OomdpMap **out);

// # Safety
// `map` must come from this library and not have been freed. Null is ignored.
void oomdp_map_free(struct OomdpMap *map);

// Canonical text of a map.
//
// # Safety
// `map` must be a live handle and `out` writable.
enum OomdpStatus oomdp_map_render(const struct OomdpMap *map, char **out);

// # Safety
// `map` must be a live handle; `width` and `height` writable.
enum OomdpStatus oomdp_map_size(const struct OomdpMap *map, uint32_t *width, uint32_t *height);

// Fewest actions that deliver box `target` from the map's start state.
//
// # Safety
// `map` must be a live handle and `out` writable.
enum OomdpStatus oomdp_map_optimal_steps(const struct OomdpMap *map,
                                         uint32_t target,
                                         uint32_t *out);

// A fresh learner for the warehouse vocabulary keeping up to `k`
// predictions per key.
//
// # Safety
// `out` must be writable.
enum OomdpStatus oomdp_learner_new(uint32_t k, struct OomdpLearner **out);

// Restores a learner from its JSON dump.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum OomdpStatus oomdp_learner_from_json(const char *json, struct OomdpLearner **out);

// # Safety
// `learner` must come from this library and not have been freed. Null is
// ignored.
void oomdp_learner_free(struct OomdpLearner *learner);

// JSON dump of the learned model.
//
// # Safety
// `learner` must be a live handle and `out` writable.
enum OomdpStatus oomdp_learner_json(const struct OomdpLearner *learner, char **out);

// Runs `episodes` training episodes with default planner settings.
//
// # Safety
// `learner` and `map` must be live handles; `out` writable or null.
enum OomdpStatus oomdp_learner_train(struct OomdpLearner *learner,
                                     const struct OomdpMap *map,
                                     uint32_t episodes,
                                     uint64_t seed,
                                     struct OomdpTrainSummary *out);

// Combines two conditions written as strings over `0`, `1` and `*`.
//
// # Safety
// `a` and `b` must be NUL-terminated strings and `out` writable.
enum OomdpStatus oomdp_condition_combine(const char *a, const char *b, char **out);

// Writes 1 to `out` when observation `obs` satisfies `model`, else 0.
//
// # Safety
// `obs` and `model` must be NUL-terminated strings and `out` writable.
enum OomdpStatus oomdp_condition_matches(const char *obs, const char *model, uint8_t *out);

// Localizes along the shortest route from the agent start to the
// destination with default filter settings.
//
// # Safety
// `map` must be a live handle and `out` writable.
enum OomdpStatus oomdp_localize(const struct OomdpMap *map,
                                uint32_t steps,
                                uint64_t seed,
                                struct OomdpLocalizeSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OOMDP_H */
