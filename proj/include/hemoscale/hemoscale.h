#ifndef HEMOSCALE_H
#define HEMOSCALE_H

/* C interface to the hemoscale simulation core. All functions return a
 * hemo_status; on failure hemo_last_error() holds a thread-local message.
 * Objects returned through out-parameters are owned by the caller and
 * released with the matching _destroy function. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define HEMOSCALE_VERSION "0.1.0"

typedef enum hemo_status {
  HEMO_OK = 0,
  HEMO_ERR_INVALID_ARGUMENT = 1,
  HEMO_ERR_NON_POSITIVE_RATE = 2,
  HEMO_ERR_EXPONENT_ORDER = 3,
  HEMO_ERR_SCALE_TOO_SMALL = 4,
  HEMO_ERR_RESONANT_PARAMETERS = 5,
  HEMO_ERR_MAX_EVENTS = 6,
  HEMO_ERR_RATE_OVERFLOW = 7,
  HEMO_ERR_ILLEGAL_EVENT = 8,
  HEMO_ERR_TRUNCATION_LEAK = 9,
  HEMO_ERR_GRID_MISMATCH = 10,
  HEMO_ERR_DEGENERATE_DESIGN = 11,
  HEMO_ERR_EMPTY_WINDOW = 12,
  HEMO_ERR_SCALE_MISMATCH = 13,
  HEMO_ERR_IO = 14,
  HEMO_ERR_CONFIG = 15,
  HEMO_ERR_INTERNAL = 16
} hemo_status;

/* time axis of a run: engine seconds, K^gamma2 seconds, K^gamma3 seconds */
typedef enum hemo_time_scale {
  HEMO_TIME_UNIT = 0,
  HEMO_TIME_GAMMA2 = 1,
  HEMO_TIME_GAMMA3 = 2
} hemo_time_scale;

/* component rescaling family applied to grid states */
typedef enum hemo_scale_kind {
  HEMO_SCALE_X = 0,       /* (N1/K, N2/K^(1+g2), N3/K^(1+g2+g3)), unit time */
  HEMO_SCALE_Y = 1,       /* same divisors, gamma2 time */
  HEMO_SCALE_Z = 2,       /* same divisors, gamma3 time */
  HEMO_SCALE_X_OVER_K = 3 /* all components over K, unit time */
} hemo_scale_kind;

const char* hemo_version(void);
const char* hemo_status_name(hemo_status s);
const char* hemo_last_error(void); /* message from this thread's last failure */

/* ---- parameters ------------------------------------------------------- */

typedef struct hemo_params hemo_params;

/* Validates tau > 0, 0 < gamma2 < gamma3 < 1 and K >= 2 (K = 1 only with
 * degenerate != 0). */
hemo_status hemo_params_create(double tau1, double tau2, double tau3, double gamma2,
                               double gamma3, int64_t K, int degenerate,
                               hemo_params** out);
void hemo_params_destroy(hemo_params* p);

/* Derived quantities; any out-pointer may be NULL. */
hemo_status hemo_params_derived(const hemo_params* p, double* p2R, double* p2D,
                                double* d3, double* n2_scale, double* n3_scale);

/* ---- simulation ------------------------------------------------------- */

typedef struct hemo_trajectory hemo_trajectory;

/* Exact SSA path from (n1, n2, n3), sampled at `grid` (rescaled units,
 * strictly increasing, within [0, horizon]); grid states use the left-limit
 * convention. max_events <= 0 selects the default budget (2^31). */
hemo_status hemo_simulate(const hemo_params* p, int64_t n1, int64_t n2, int64_t n3,
                          double horizon, hemo_time_scale time_scale,
                          const double* grid, size_t grid_len, uint64_t seed,
                          uint64_t stream, int64_t max_events, hemo_trajectory** out);

/* Tau-leaping variant; epsilon in (0, 1), exact stepping below min_rate. */
hemo_status hemo_simulate_tau_leap(const hemo_params* p, int64_t n1, int64_t n2,
                                   int64_t n3, double horizon,
                                   hemo_time_scale time_scale, const double* grid,
                                   size_t grid_len, uint64_t seed, uint64_t stream,
                                   int64_t max_events, double epsilon, double min_rate,
                                   hemo_trajectory** out);

void hemo_trajectory_destroy(hemo_trajectory* t);

size_t hemo_trajectory_grid_size(const hemo_trajectory* t);

/* Copies grid data into caller arrays of length hemo_trajectory_grid_size();
 * any pointer may be NULL to skip that column. */
hemo_status hemo_trajectory_data(const hemo_trajectory* t, double* time_rescaled,
                                 double* time_absolute, int64_t* n1, int64_t* n2,
                                 int64_t* n3);

/* Rescaled components under the requested family; the trajectory's time scale
 * must match the family (X/XOverK: unit, Y: gamma2, Z: gamma3). */
hemo_status hemo_trajectory_rescaled(const hemo_trajectory* t, hemo_scale_kind kind,
                                     double* x1, double* x2, double* x3);

/* Event accounting: counts[5] per channel in the order renewal1,
 * differentiation1, renewal2, differentiation2, death3; integrals[3] hold
 * int N_i ds in absolute time. Any pointer may be NULL. */
hemo_status hemo_trajectory_stats(const hemo_trajectory* t, int64_t* counts,
                                  double* integrals, int64_t* event_count,
                                  double* terminal_time, int* truncated);

hemo_status hemo_trajectory_final_state(const hemo_trajectory* t, int64_t* n1,
                                        int64_t* n2, int64_t* n3);

/* ---- deterministic curves --------------------------------------------- */

/* Closed-form mean of the chain from initial means (m1, m2, m3); fills en1,
 * en2, en3 (each length n, NULL to skip) at absolute times ts. Fails with
 * HEMO_ERR_RESONANT_PARAMETERS when tau2 K^(gamma3-gamma2) == tau3. */
hemo_status hemo_mean_curve(const hemo_params* p, double m1, double m2, double m3,
                            const double* ts, size_t n, double* en1, double* en2,
                            double* en3);

/* Limit curve on the gamma2 scale: y1 = x1, y2 relaxes to tau1 x1 / tau2. */
hemo_status hemo_limit_y(double x1, double x2, double tau1, double tau2,
                         const double* ts, size_t n, double* y1, double* y2);

/* Limit curve on the gamma3 scale: z1 = x1, z3 relaxes to 2 p2D* tau1 x1 /
 * tau3 with p2D* = 1/2 (the K -> infinity differentiation probability). */
hemo_status hemo_limit_z(double x1, double x3, double tau1, double tau2, double tau3,
                         const double* ts, size_t n, double* z1, double* z3);

/* ---- limit SDE paths --------------------------------------------------- */

typedef struct hemo_sde_path hemo_sde_path;

/* U system: dU1 = sqrt(tau1 x1) dB1, dU2 = (tau1 U1 - tau2 U2) dt, U(0) = 0.
 * use_euler selects Euler-Maruyama with substep dt; otherwise the exact
 * Gaussian transition is sampled grid-to-grid. */
hemo_status hemo_simulate_u(double tau1, double tau2, double x1, const double* grid,
                            size_t grid_len, double dt, int use_euler, uint64_t seed,
                            uint64_t stream, hemo_sde_path** out);

/* W2 martingale term; time_changed = 0 gives sqrt(tau2 y2(t)) B2(t), else the
 * time-changed martingale with quadratic variation int tau2 y2 ds. */
hemo_status hemo_simulate_w2(double tau1, double tau2, double x1, double x2,
                             const double* grid, size_t grid_len, double dt,
                             int use_euler, int time_changed, uint64_t seed,
                             uint64_t stream, hemo_sde_path** out);

/* V system: dV1 = sqrt(tau1 x1) dW1, dV3 = (tau1 V1 - tau3 V3) dt, V(0) = 0. */
hemo_status hemo_simulate_v(double tau1, double tau3, double x1, const double* grid,
                            size_t grid_len, double dt, int use_euler, uint64_t seed,
                            uint64_t stream, hemo_sde_path** out);

void hemo_sde_path_destroy(hemo_sde_path* p);

size_t hemo_sde_path_size(const hemo_sde_path* p);

/* Copies component paths into caller arrays of length hemo_sde_path_size();
 * c1/c2 may be NULL. W2 paths fill c1 only. */
hemo_status hemo_sde_path_data(const hemo_sde_path* p, double* c1, double* c2);

/* ---- command runner ----------------------------------------------------- */

/* Executes a CLI-level command: simulate | ensemble | limits | fluct |
 * scaling-study | validate. config_path may be NULL for validate (bundled
 * instance). Writes outputs under out_dir and stores the process exit code
 * (0 ok, 2 config error, 3 runtime guard, 4 validation failure) in
 * *exit_code. Diagnostics go to stderr. threads <= 0 resolves via the
 * HEMOSCALE_THREADS environment variable, then hardware concurrency. */
hemo_status hemo_run_command(const char* command, const char* config_path,
                             const char* out_dir, int has_seed_override,
                             uint64_t seed_override, int threads, int* exit_code);

#ifdef __cplusplus
}
#endif

#endif /* HEMOSCALE_H */
