#ifndef LISSAJOUS_SWARM_H
#define LISSAJOUS_SWARM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every entry point.
typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_UTF8 = 2,
  LS_STATUS_INVALID_CONFIG = 3,
  LS_STATUS_GUARANTEE_REFUSED = 4,
  LS_STATUS_SIMULATION_FAILED = 5,
  LS_STATUS_IO = 6,
  LS_STATUS_OUT_OF_RANGE = 7,
  LS_STATUS_PANIC = 8,
} LsStatus;

// Completed run with its trace, events and summary.
typedef struct LsRun LsRun;

// Parsed, validated scenario.
typedef struct LsScenario LsScenario;

// Scenario advanced one tick at a time.
typedef struct LsWorld LsWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into this library on the same thread.
const char *ls_last_error_message(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed already.
void ls_string_free(char *s);

// Parses and validates a scenario from TOML text.
//
// # Safety
// `toml` must be a nul-terminated string; `out` must be writable.
enum LsStatus ls_scenario_from_toml(const char *toml, struct LsScenario **out);

// Parses and validates a scenario file.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum LsStatus ls_scenario_from_file(const char *path, struct LsScenario **out);

// # Safety
// `scenario` must be a live handle.
enum LsStatus ls_scenario_set_seed(struct LsScenario *scenario, uint64_t seed);

// Writes the number of robots to `out`.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum LsStatus ls_scenario_robot_count(const struct LsScenario *scenario, size_t *out);

// Guarantee report as a JSON string; free it with [`ls_string_free`].
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum LsStatus ls_scenario_plan_json(const struct LsScenario *scenario, char **out);

// # Safety
// `scenario` must be null or a handle not yet freed.
void ls_scenario_free(struct LsScenario *scenario);

// Builds a world at time zero. Does not run the guarantee check.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum LsStatus ls_world_new(const struct LsScenario *scenario, struct LsWorld **out);

// Advances the world by `ticks` steps.
//
// # Safety
// `world` must be a live handle.
enum LsStatus ls_world_step(struct LsWorld *world, size_t ticks);

// # Safety
// `world` must be a live handle; `out` must be writable.
enum LsStatus ls_world_time(const struct LsWorld *world, double *out);

// Phase and position of one robot; `position` receives x, y, z.
//
// # Safety
// `world` must be a live handle; `phase` must be writable and `position`
// must point to three writable doubles.
enum LsStatus ls_world_robot(const struct LsWorld *world,
                             size_t robot,
                             double *phase,
                             double *position);

// Smallest 3D distance between nominal robots at the current tick.
//
// # Safety
// `world` must be a live handle; `out` must be writable.
enum LsStatus ls_world_min_distance(const struct LsWorld *world, double *out);

// # Safety
// `world` must be null or a handle not yet freed.
void ls_world_free(struct LsWorld *world);

// Runs the scenario to completion, refusing it when the guarantee check
// fails without the override flag.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum LsStatus ls_run(const struct LsScenario *scenario, struct LsRun **out);

// Summary as a JSON string; free it with [`ls_string_free`].
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum LsStatus ls_run_summary_json(const struct LsRun *run, char **out);

// Number of logged trace rows.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum LsStatus ls_run_trace_rows(const struct LsRun *run, size_t *out);

// Writes trace.csv, events.json and summary.json into `dir`.
//
// # Safety
// `run` must be a live handle; `dir` must be a nul-terminated string.
enum LsStatus ls_run_write(const struct LsRun *run, const char *dir);

// # Safety
// `run` must be null or a handle not yet freed.
void ls_run_free(struct LsRun *run);

// Point of a Lissajous curve at parameter `theta`; `out` receives x, y, z.
//
// # Safety
// `out` must point to three writable doubles.
enum LsStatus ls_curve_eval(double amp_x,
                            double amp_y,
                            double amp_z,
                            uint32_t freq_x,
                            uint32_t freq_y,
                            uint32_t freq_z,
                            double phase,
                            double theta,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LISSAJOUS_SWARM_H */
