#include "hemoscale/hemoscale.h"

#include <string>
#include <string_view>

#include "fluct.hpp"
#include "limits.hpp"
#include "model.hpp"
#include "runner.hpp"
#include "ssa.hpp"

static_assert(std::string_view(hemo::kVersion) == HEMOSCALE_VERSION,
              "header version out of sync with the library");

struct hemo_params {
  hemo::ModelParams p;
  hemo::DerivedRates r;
};

struct hemo_trajectory {
  hemo::Trajectory t;
};

struct hemo_sde_path {
  hemo::SdePath p;
};

namespace {

thread_local std::string g_lastError;

hemo_status to_status(hemo::Errc c) {
  using hemo::Errc;
  switch (c) {
    case Errc::Ok: return HEMO_OK;
    case Errc::InvalidArgument: return HEMO_ERR_INVALID_ARGUMENT;
    case Errc::NonPositiveRate: return HEMO_ERR_NON_POSITIVE_RATE;
    case Errc::ExponentOrderViolated: return HEMO_ERR_EXPONENT_ORDER;
    case Errc::ScaleTooSmall: return HEMO_ERR_SCALE_TOO_SMALL;
    case Errc::ResonantParameters: return HEMO_ERR_RESONANT_PARAMETERS;
    case Errc::MaxEventsExceeded: return HEMO_ERR_MAX_EVENTS;
    case Errc::RateOverflow: return HEMO_ERR_RATE_OVERFLOW;
    case Errc::IllegalEvent: return HEMO_ERR_ILLEGAL_EVENT;
    case Errc::TruncationLeakTooLarge: return HEMO_ERR_TRUNCATION_LEAK;
    case Errc::GridMismatch: return HEMO_ERR_GRID_MISMATCH;
    case Errc::DegenerateDesign: return HEMO_ERR_DEGENERATE_DESIGN;
    case Errc::EmptyWindow: return HEMO_ERR_EMPTY_WINDOW;
    case Errc::ScaleMismatch: return HEMO_ERR_SCALE_MISMATCH;
    case Errc::Io: return HEMO_ERR_IO;
    case Errc::Config: return HEMO_ERR_CONFIG;
    case Errc::Internal: return HEMO_ERR_INTERNAL;
  }
  return HEMO_ERR_INTERNAL;
}

template <class F>
hemo_status guarded(F&& f) {
  try {
    f();
    return HEMO_OK;
  } catch (const hemo::Error& e) {
    g_lastError = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_lastError = e.what();
    return HEMO_ERR_INTERNAL;
  } catch (...) {
    g_lastError = "unknown failure";
    return HEMO_ERR_INTERNAL;
  }
}

hemo_status bad_arg(const char* msg) {
  g_lastError = msg;
  return HEMO_ERR_INVALID_ARGUMENT;
}

hemo::SimulationConfig make_sim_config(double horizon, hemo_time_scale ts,
                                       const double* grid, size_t gridLen,
                                       uint64_t seed, uint64_t stream,
                                       int64_t maxEvents) {
  hemo::SimulationConfig cfg;
  cfg.horizon = horizon;
  cfg.timeScale = static_cast<hemo::TimeScale>(ts);
  if (grid && gridLen) cfg.sampleGrid.assign(grid, grid + gridLen);
  cfg.seed = seed;
  cfg.stream = stream;
  if (maxEvents > 0) cfg.maxEvents = maxEvents;
  return cfg;
}

hemo::SdeConfig make_sde_config(double dt, int useEuler, uint64_t seed,
                                uint64_t stream) {
  hemo::SdeConfig cfg;
  cfg.dt = dt;
  cfg.sampler = useEuler ? hemo::SdeSampler::EulerMaruyama
                         : hemo::SdeSampler::ExactGaussian;
  cfg.seed = seed;
  cfg.stream = stream;
  return cfg;
}

}  // namespace

extern "C" {

const char* hemo_version(void) { return hemo::kVersion; }

const char* hemo_status_name(hemo_status s) {
  switch (s) {
    case HEMO_OK: return "ok";
    case HEMO_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case HEMO_ERR_NON_POSITIVE_RATE: return "non_positive_rate";
    case HEMO_ERR_EXPONENT_ORDER: return "exponent_order_violated";
    case HEMO_ERR_SCALE_TOO_SMALL: return "scale_too_small";
    case HEMO_ERR_RESONANT_PARAMETERS: return "resonant_parameters";
    case HEMO_ERR_MAX_EVENTS: return "max_events_exceeded";
    case HEMO_ERR_RATE_OVERFLOW: return "rate_overflow";
    case HEMO_ERR_ILLEGAL_EVENT: return "illegal_event";
    case HEMO_ERR_TRUNCATION_LEAK: return "truncation_leak_too_large";
    case HEMO_ERR_GRID_MISMATCH: return "grid_mismatch";
    case HEMO_ERR_DEGENERATE_DESIGN: return "degenerate_design";
    case HEMO_ERR_EMPTY_WINDOW: return "empty_window";
    case HEMO_ERR_SCALE_MISMATCH: return "scale_mismatch";
    case HEMO_ERR_IO: return "io";
    case HEMO_ERR_CONFIG: return "config";
    case HEMO_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* hemo_last_error(void) { return g_lastError.c_str(); }

hemo_status hemo_params_create(double tau1, double tau2, double tau3, double gamma2,
                               double gamma3, int64_t K, int degenerate,
                               hemo_params** out) {
  if (!out) return bad_arg("out must not be NULL");
  *out = nullptr;
  return guarded([&] {
    const hemo::ModelParams p =
        hemo::validate_params(tau1, tau2, tau3, gamma2, gamma3, K, degenerate != 0);
    *out = new hemo_params{p, hemo::derive_rates(p)};
  });
}

void hemo_params_destroy(hemo_params* p) { delete p; }

hemo_status hemo_params_derived(const hemo_params* p, double* p2R, double* p2D,
                                double* d3, double* n2_scale, double* n3_scale) {
  if (!p) return bad_arg("params must not be NULL");
  if (p2R) *p2R = p->r.p2R;
  if (p2D) *p2D = p->r.p2D;
  if (d3) *d3 = p->r.d3;
  if (n2_scale) *n2_scale = p->r.n2Scale;
  if (n3_scale) *n3_scale = p->r.n3Scale;
  return HEMO_OK;
}

hemo_status hemo_simulate(const hemo_params* p, int64_t n1, int64_t n2, int64_t n3,
                          double horizon, hemo_time_scale time_scale,
                          const double* grid, size_t grid_len, uint64_t seed,
                          uint64_t stream, int64_t max_events, hemo_trajectory** out) {
  if (!p) return bad_arg("params must not be NULL");
  if (!out) return bad_arg("out must not be NULL");
  if (grid_len && !grid) return bad_arg("grid must not be NULL when grid_len > 0");
  *out = nullptr;
  return guarded([&] {
    const hemo::SimulationConfig cfg =
        make_sim_config(horizon, time_scale, grid, grid_len, seed, stream, max_events);
    *out = new hemo_trajectory{
        hemo::simulate_exact(p->p, hemo::PopulationState{n1, n2, n3}, cfg)};
  });
}

hemo_status hemo_simulate_tau_leap(const hemo_params* p, int64_t n1, int64_t n2,
                                   int64_t n3, double horizon,
                                   hemo_time_scale time_scale, const double* grid,
                                   size_t grid_len, uint64_t seed, uint64_t stream,
                                   int64_t max_events, double epsilon, double min_rate,
                                   hemo_trajectory** out) {
  if (!p) return bad_arg("params must not be NULL");
  if (!out) return bad_arg("out must not be NULL");
  if (grid_len && !grid) return bad_arg("grid must not be NULL when grid_len > 0");
  *out = nullptr;
  return guarded([&] {
    const hemo::SimulationConfig cfg =
        make_sim_config(horizon, time_scale, grid, grid_len, seed, stream, max_events);
    hemo::LeapConfig leap;
    leap.epsilon = epsilon;
    leap.minRateForLeap = min_rate;
    *out = new hemo_trajectory{
        hemo::simulate_tau_leap(p->p, hemo::PopulationState{n1, n2, n3}, cfg, leap)};
  });
}

void hemo_trajectory_destroy(hemo_trajectory* t) { delete t; }

size_t hemo_trajectory_grid_size(const hemo_trajectory* t) {
  return t ? t->t.gridRescaled.size() : 0;
}

hemo_status hemo_trajectory_data(const hemo_trajectory* t, double* time_rescaled,
                                 double* time_absolute, int64_t* n1, int64_t* n2,
                                 int64_t* n3) {
  if (!t) return bad_arg("trajectory must not be NULL");
  const hemo::Trajectory& tr = t->t;
  for (std::size_t i = 0; i < tr.gridRescaled.size(); ++i) {
    if (time_rescaled) time_rescaled[i] = tr.gridRescaled[i];
    if (time_absolute) time_absolute[i] = tr.gridAbsolute[i];
    if (n1) n1[i] = tr.states[i].n1;
    if (n2) n2[i] = tr.states[i].n2;
    if (n3) n3[i] = tr.states[i].n3;
  }
  return HEMO_OK;
}

hemo_status hemo_trajectory_rescaled(const hemo_trajectory* t, hemo_scale_kind kind,
                                     double* x1, double* x2, double* x3) {
  if (!t) return bad_arg("trajectory must not be NULL");
  return guarded([&] {
    const hemo::RescaledPath path =
        hemo::rescale(t->t, static_cast<hemo::ScaleKind>(kind));
    for (std::size_t i = 0; i < path.comps.size(); ++i) {
      if (x1) x1[i] = path.comps[i][0];
      if (x2) x2[i] = path.comps[i][1];
      if (x3) x3[i] = path.comps[i][2];
    }
  });
}

hemo_status hemo_trajectory_stats(const hemo_trajectory* t, int64_t* counts,
                                  double* integrals, int64_t* event_count,
                                  double* terminal_time, int* truncated) {
  if (!t) return bad_arg("trajectory must not be NULL");
  const hemo::Trajectory& tr = t->t;
  if (counts)
    for (int c = 0; c < hemo::kNumChannels; ++c) counts[c] = tr.channelCounts[c];
  if (integrals)
    for (int c = 0; c < 3; ++c) integrals[c] = tr.rateIntegrals[c];
  if (event_count) *event_count = tr.eventCount;
  if (terminal_time) *terminal_time = tr.terminalTime;
  if (truncated) *truncated = tr.truncated ? 1 : 0;
  return HEMO_OK;
}

hemo_status hemo_trajectory_final_state(const hemo_trajectory* t, int64_t* n1,
                                        int64_t* n2, int64_t* n3) {
  if (!t) return bad_arg("trajectory must not be NULL");
  if (n1) *n1 = t->t.finalState.n1;
  if (n2) *n2 = t->t.finalState.n2;
  if (n3) *n3 = t->t.finalState.n3;
  return HEMO_OK;
}

hemo_status hemo_mean_curve(const hemo_params* p, double m1, double m2, double m3,
                            const double* ts, size_t n, double* en1, double* en2,
                            double* en3) {
  if (!p) return bad_arg("params must not be NULL");
  if (n && !ts) return bad_arg("ts must not be NULL when n > 0");
  return guarded([&] {
    const hemo::MeanCurve curve = hemo::make_mean_curve(p->p, {m1, m2, m3});
    for (std::size_t i = 0; i < n; ++i) {
      if (!(ts[i] >= 0))
        hemo::fail(hemo::Errc::InvalidArgument, "times must be non-negative");
      const std::array<double, 3> v = curve(ts[i]);
      if (en1) en1[i] = v[0];
      if (en2) en2[i] = v[1];
      if (en3) en3[i] = v[2];
    }
  });
}

hemo_status hemo_limit_y(double x1, double x2, double tau1, double tau2,
                         const double* ts, size_t n, double* y1, double* y2) {
  if (n && !ts) return bad_arg("ts must not be NULL when n > 0");
  return guarded([&] {
    const hemo::LimitCurveY curve = hemo::make_limit_y(x1, x2, tau1, tau2);
    for (std::size_t i = 0; i < n; ++i) {
      const std::array<double, 2> v = curve(ts[i]);
      if (y1) y1[i] = v[0];
      if (y2) y2[i] = v[1];
    }
  });
}

hemo_status hemo_limit_z(double x1, double x3, double tau1, double tau2, double tau3,
                         const double* ts, size_t n, double* z1, double* z3) {
  if (n && !ts) return bad_arg("ts must not be NULL when n > 0");
  return guarded([&] {
    const hemo::LimitCurveZ curve = hemo::make_limit_z(x1, x3, tau1, tau2, tau3);
    for (std::size_t i = 0; i < n; ++i) {
      const std::array<double, 2> v = curve(ts[i]);
      if (z1) z1[i] = v[0];
      if (z3) z3[i] = v[1];
    }
  });
}

hemo_status hemo_simulate_u(double tau1, double tau2, double x1, const double* grid,
                            size_t grid_len, double dt, int use_euler, uint64_t seed,
                            uint64_t stream, hemo_sde_path** out) {
  if (!out) return bad_arg("out must not be NULL");
  if (!grid || !grid_len) return bad_arg("grid must not be empty");
  *out = nullptr;
  return guarded([&] {
    *out = new hemo_sde_path{
        hemo::simulate_U(tau1, tau2, x1, {0, 0},
                         std::vector<double>(grid, grid + grid_len),
                         make_sde_config(dt, use_euler, seed, stream))};
  });
}

hemo_status hemo_simulate_w2(double tau1, double tau2, double x1, double x2,
                             const double* grid, size_t grid_len, double dt,
                             int use_euler, int time_changed, uint64_t seed,
                             uint64_t stream, hemo_sde_path** out) {
  if (!out) return bad_arg("out must not be NULL");
  if (!grid || !grid_len) return bad_arg("grid must not be empty");
  *out = nullptr;
  return guarded([&] {
    *out = new hemo_sde_path{hemo::simulate_W2(
        tau1, tau2, x1, x2, std::vector<double>(grid, grid + grid_len),
        make_sde_config(dt, use_euler, seed, stream),
        time_changed ? hemo::W2Mode::TimeChanged : hemo::W2Mode::Literal)};
  });
}

hemo_status hemo_simulate_v(double tau1, double tau3, double x1, const double* grid,
                            size_t grid_len, double dt, int use_euler, uint64_t seed,
                            uint64_t stream, hemo_sde_path** out) {
  if (!out) return bad_arg("out must not be NULL");
  if (!grid || !grid_len) return bad_arg("grid must not be empty");
  *out = nullptr;
  return guarded([&] {
    *out = new hemo_sde_path{
        hemo::simulate_V(tau1, tau3, x1, {0, 0},
                         std::vector<double>(grid, grid + grid_len),
                         make_sde_config(dt, use_euler, seed, stream))};
  });
}

void hemo_sde_path_destroy(hemo_sde_path* p) { delete p; }

size_t hemo_sde_path_size(const hemo_sde_path* p) { return p ? p->p.grid.size() : 0; }

hemo_status hemo_sde_path_data(const hemo_sde_path* p, double* c1, double* c2) {
  if (!p) return bad_arg("path must not be NULL");
  for (std::size_t i = 0; i < p->p.comps.size(); ++i) {
    if (c1) c1[i] = p->p.comps[i][0];
    if (c2) c2[i] = p->p.comps[i][1];
  }
  return HEMO_OK;
}

hemo_status hemo_run_command(const char* command, const char* config_path,
                             const char* out_dir, int has_seed_override,
                             uint64_t seed_override, int threads, int* exit_code) {
  if (!command) return bad_arg("command must not be NULL");
  if (!exit_code) return bad_arg("exit_code must not be NULL");
  hemo::CliOptions opts;
  opts.command = command;
  if (config_path) opts.configPath = config_path;
  if (out_dir) opts.outDir = out_dir;
  opts.hasSeedOverride = has_seed_override != 0;
  opts.seedOverride = seed_override;
  opts.threads = threads;
  *exit_code = hemo::run_command(opts);
  return HEMO_OK;
}

}  // extern "C"
