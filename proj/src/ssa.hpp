#pragma once
#include <array>
#include <cstdint>
#include <vector>

#include "model.hpp"

namespace hemo {

enum class TimeScale : int { Unit = 0, Gamma2 = 1, Gamma3 = 2 };

// engine seconds per rescaled time unit: K^0, K^gamma2, K^gamma3
double time_scale_factor(TimeScale s, const DerivedRates& r);

struct SimulationConfig {
  double horizon = 1.0;  // rescaled units
  TimeScale timeScale = TimeScale::Unit;
  std::vector<double> sampleGrid;  // rescaled units, strictly increasing, in [0, horizon]
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::int64_t maxEvents = std::int64_t{1} << 31;
};

struct LeapConfig {
  double epsilon = 0.03;
  double minRateForLeap = 20.0;
};

// Grid-sampled path. Event logs are never stored; per-channel counters and the
// exact rate integrals carry everything the compensator diagnostics need.
// Grid states use the left-limit convention.
struct Trajectory {
  ModelParams params;
  DerivedRates rates;
  PopulationState initial;
  TimeScale timeScale = TimeScale::Unit;
  double timeFactor = 1.0;
  std::vector<double> gridRescaled;
  std::vector<double> gridAbsolute;
  std::vector<PopulationState> states;
  PopulationState finalState;
  std::array<std::int64_t, kNumChannels> channelCounts{};
  std::array<double, 3> rateIntegrals{};  // int N1 ds, int N2 ds, int N3 ds (absolute time)
  double terminalTime = 0.0;              // absolute
  std::int64_t eventCount = 0;
  bool truncated = false;  // maxEvents guard tripped; grids hold the recorded prefix
};

Trajectory simulate_exact(const ModelParams& p, const PopulationState& initial,
                          const SimulationConfig& cfg);

// Poisson leaps with Cao-style two-term step selection (g_i = 1), rejection and
// halving on negative excursions, exact stepping below minRateForLeap.
Trajectory simulate_tau_leap(const ModelParams& p, const PopulationState& initial,
                             const SimulationConfig& cfg, const LeapConfig& leap);

struct EventAccounting {
  std::array<std::int64_t, kNumChannels> counts{};
  std::array<double, 3> integrals{};
};

EventAccounting event_counts(const Trajectory& t);

}  // namespace hemo
