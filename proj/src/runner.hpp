#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fluct.hpp"
#include "limits.hpp"
#include "model.hpp"
#include "ssa.hpp"

namespace hemo {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kConfigSchema = 1;

// Exit-code contract: 0 ok, 2 config error, 3 runtime guard trip,
// 4 validation failure. Parameter-level rejections (including resonant
// parameter sets) count as config errors; guards that can only trip during
// execution map to 3.
int exit_code_for(Errc c);

struct RunConfig {
  ModelParams model{};
  PopulationState initial{};  // defaults to (K, 0, 0)

  // [run]
  std::string scaleName = "x";  // x | x_over_k | y | z (unit/gamma2/gamma3 aliases)
  TimeScale timeScale = TimeScale::Unit;
  ScaleKind scaleKind = ScaleKind::X;
  double horizon = 1.0;
  std::vector<double> grid;  // rescaled units, resolved at load
  std::uint64_t seed = 0;
  std::int64_t maxEvents = std::int64_t{1} << 31;
  std::string outPrefix;  // defaults to the command name

  // [leap]
  bool leapEnabled = false;
  LeapConfig leap{};

  // [ensemble]
  int replicas = 100;

  // [sweep]
  std::vector<std::int64_t> sweepK;
  int sweepReplicas = 100;
  double sweepT = 1.0;
  int sweepGridPoints = 201;
  std::string sweepStatistic = "std_n3";  // std_n3 | v2_sup

  // [sde]
  SdeConfig sde{};
  int sdePaths = 1000;
  W2Mode w2Mode = W2Mode::Literal;
  double x1 = 1, x2 = 0, x3 = 0;  // rescaled initial levels, derived from initial

  // [limits]
  std::array<double, 3> initialMeans{};  // absolute counts, defaults to initial

  // [validate]
  std::int64_t validateReplicas = 100000;
  int compensatorReplicas = 200;
  double tvFactor = 1.25;
};

RunConfig load_run_config(const std::string& path);
RunConfig default_validate_config();

struct CliOptions {
  std::string command;
  std::string configPath;  // may stay empty for validate
  std::string outDir = ".";
  bool hasSeedOverride = false;
  std::uint64_t seedOverride = 0;
  int threads = 0;  // <=0 resolves via HEMOSCALE_THREADS, then hardware
};

// Each command writes its CSV/JSON outputs plus a manifest into outDir and
// returns a process exit code; config and runtime failures throw Error.
int cmd_simulate(const RunConfig& cfg, const std::string& outDir);
int cmd_ensemble(const RunConfig& cfg, const std::string& outDir, int threads);
int cmd_limits(const RunConfig& cfg, const std::string& outDir);
int cmd_fluct(const RunConfig& cfg, const std::string& outDir, int threads);
int cmd_scaling_study(const RunConfig& cfg, const std::string& outDir, int threads);
int cmd_validate(const RunConfig& cfg, const std::string& outDir, int threads);

// Dispatch plus exception-to-exit-code mapping; never throws.
int run_command(const CliOptions& opts);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace hemo
