#ifndef RISNOMA_H
#define RISNOMA_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RisPreset {
  RIS_PRESET_DESK = 0,
  RIS_PRESET_PAPER = 1,
} RisPreset;

typedef enum RisSolveStatus {
  RIS_SOLVE_STATUS_CONVERGED = 0,
  RIS_SOLVE_STATUS_MAX_ITERS = 1,
  RIS_SOLVE_STATUS_FAILED_FEASIBILITY = 2,
} RisSolveStatus;

typedef enum RisStatus {
  RIS_STATUS_OK = 0,
  RIS_STATUS_NULL_POINTER = 1,
  RIS_STATUS_INVALID_ARGUMENT = 2,
  RIS_STATUS_CONFIG = 3,
  RIS_STATUS_INFEASIBLE_SCENARIO = 4,
  RIS_STATUS_SOLVER = 5,
  RIS_STATUS_BUFFER_TOO_SMALL = 6,
  RIS_STATUS_PANIC = 7,
} RisStatus;

/**
 * Scenario configuration.
 */
typedef struct RisConfig RisConfig;

/**
 * Design and trace of one baseline run.
 */
typedef struct RisResult RisResult;

/**
 * Channels and initial phases drawn for one seed.
 */
typedef struct RisScenario RisScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into this library from the same thread.
 */
const char *ris_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ris_version(void);

/**
 * Creates a preset configuration.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum RisStatus ris_config_new(enum RisPreset preset, struct RisConfig **out);

/**
 * Parses a TOML configuration (same keys as the config file).
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` as in [`ris_config_new`].
 */
enum RisStatus ris_config_from_toml(const char *toml, struct RisConfig **out);

/**
 * Sets the transmit power budget in dBm.
 *
 * # Safety
 * `cfg` must come from this library and not be freed.
 */
enum RisStatus ris_config_set_power_dbm(struct RisConfig *cfg, double p_max_dbm);

/**
 * # Safety
 * `cfg` must come from [`ris_config_new`] or [`ris_config_from_toml`] and
 * not be used afterwards. NULL is ignored.
 */
void ris_config_free(struct RisConfig *cfg);

/**
 * Draws channels and initial phases for `seed`.
 *
 * # Safety
 * `cfg` must be a live configuration; `out` must be writable.
 */
enum RisStatus ris_scenario_draw(const struct RisConfig *cfg,
                                 uint64_t seed,
                                 struct RisScenario **out);

/**
 * # Safety
 * As [`ris_config_free`].
 */
void ris_scenario_free(struct RisScenario *sc);

/**
 * Solves the scenario with the named baseline (`proposed`, `comm_only`,
 * `discrete:<bits>`, `random_phase`, `without_ris`, `without_noma`).
 *
 * # Safety
 * `sc` must be live, `baseline` NUL-terminated and `out` writable.
 */
enum RisStatus ris_solve(const struct RisScenario *sc,
                         const char *baseline,
                         struct RisResult **out);

/**
 * # Safety
 * As [`ris_config_free`].
 */
void ris_result_free(struct RisResult *res);

/**
 * Sum rate of the final design in bits/s/Hz.
 *
 * # Safety
 * `res` must be live; `out` writable.
 */
enum RisStatus ris_result_sum_rate(const struct RisResult *res, double *out);

/**
 * Final solver status.
 *
 * # Safety
 * `res` must be live; `out` writable.
 */
enum RisStatus ris_result_status(const struct RisResult *res, enum RisSolveStatus *out);

/**
 * Sum rate before the first iteration followed by the rate after each
 * iteration. Writes `min(len, needed)` values and stores the full count in
 * `needed`; returns [`RisStatus::BufferTooSmall`] when `len < needed`.
 *
 * # Safety
 * `buf` must hold `len` doubles (may be NULL when `len == 0`); `needed`
 * must be writable.
 */
enum RisStatus ris_result_sum_rate_trace(const struct RisResult *res,
                                         double *buf,
                                         size_t len,
                                         size_t *needed);

/**
 * Smallest radar SNR lower bound over targets divided by its threshold,
 * in dB. +inf without targets.
 *
 * # Safety
 * `res` must be live; `out` writable.
 */
enum RisStatus ris_result_min_snr_margin_db(const struct RisResult *res, double *out);

/**
 * RIS phases of the final design, in radians. Same buffer protocol as
 * [`ris_result_sum_rate_trace`].
 *
 * # Safety
 * As [`ris_result_sum_rate_trace`].
 */
enum RisStatus ris_result_phases(const struct RisResult *res,
                                 double *buf,
                                 size_t len,
                                 size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RISNOMA_H */
