#include "runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "analysis.hpp"
#include "json.hpp"
#include "toml_lite.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace hemo {

int exit_code_for(Errc c) {
  switch (c) {
    case Errc::Config:
    case Errc::InvalidArgument:
    case Errc::NonPositiveRate:
    case Errc::ExponentOrderViolated:
    case Errc::ScaleTooSmall:
    case Errc::ResonantParameters:
    case Errc::DegenerateDesign:
    case Errc::EmptyWindow:
    case Errc::GridMismatch:
    case Errc::ScaleMismatch:
      return 2;
    default:
      return 3;
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

struct CsvWriter {
  std::ofstream out;
  std::size_t nRows = 0;
  std::string name;

  CsvWriter(const fs::path& p, const std::string& header) : name(p.filename().string()) {
    out.open(p, std::ios::binary);
    if (!out) fail(Errc::Io, "cannot open output file: " + p.string());
    out << header << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
    ++nRows;
  }

  void done() {
    out.flush();
    if (!out) fail(Errc::Io, "write failed: " + name);
  }
};

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::int64_t v) { return std::to_string(v); }

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void check_known_keys(const toml::Table& t, const std::string& table,
                      std::initializer_list<const char*> known) {
  for (const auto& [key, value] : t) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) {
        ok = true;
        break;
      }
    if (!ok)
      fail(Errc::Config, "unknown key '" + key + "' in table [" + table + "]");
  }
}

void parse_scale(const std::string& name, TimeScale& ts, ScaleKind& sk) {
  if (name == "x" || name == "unit") {
    ts = TimeScale::Unit;
    sk = ScaleKind::X;
  } else if (name == "x_over_k") {
    ts = TimeScale::Unit;
    sk = ScaleKind::XOverK;
  } else if (name == "y" || name == "gamma2") {
    ts = TimeScale::Gamma2;
    sk = ScaleKind::Y;
  } else if (name == "z" || name == "gamma3") {
    ts = TimeScale::Gamma3;
    sk = ScaleKind::Z;
  } else {
    fail(Errc::Config, "unknown scale '" + name +
                           "' (expected x, x_over_k, y, z or unit/gamma2/gamma3)");
  }
}

std::vector<double> uniform_grid(double horizon, int points) {
  if (points < 2) fail(Errc::Config, "grid_points must be at least 2");
  std::vector<double> g(points);

  for (int i = 0; i < points; ++i)
    g[i] = horizon * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

json model_json(const ModelParams& m) {
  json j;
  j["tau1"] = m.tau1;
  j["tau2"] = m.tau2;
  j["tau3"] = m.tau3;
  j["gamma2"] = m.gamma2;
  j["gamma3"] = m.gamma3;
  j["K"] = m.K;
  if (m.degenerate) j["degenerate"] = true;
  return j;
}

json config_echo(const RunConfig& c, const std::string& command) {
  json j;
  j["model"] = model_json(c.model);
  j["initial"] = {{"n1", c.initial.n1}, {"n2", c.initial.n2}, {"n3", c.initial.n3}};
  json run;
  run["scale"] = c.scaleName;
  run["horizon"] = c.horizon;
  run["grid_points"] = c.grid.size();
  run["seed"] = c.seed;
  run["max_events"] = c.maxEvents;
  run["out_prefix"] = c.outPrefix;
  j["run"] = run;
  if (command == "simulate" && c.leapEnabled)
    j["leap"] = {{"enabled", true},
                 {"epsilon", c.leap.epsilon},
                 {"min_rate", c.leap.minRateForLeap}};
  if (command == "ensemble") j["ensemble"] = {{"replicas", c.replicas}};
  if (command == "scaling-study")
    j["sweep"] = {{"K", c.sweepK},
                  {"replicas", c.sweepReplicas},
                  {"t", c.sweepT},
                  {"grid_points", c.sweepGridPoints},
                  {"statistic", c.sweepStatistic}};
  if (command == "fluct")
    j["sde"] = {{"dt", c.sde.dt},
                {"sampler", c.sde.sampler == SdeSampler::ExactGaussian ? "exact" : "euler"},
                {"paths", c.sdePaths},
                {"w2_mode", c.w2Mode == W2Mode::Literal ? "literal" : "time_changed"},
                {"x1", c.x1},
                {"x2", c.x2},
                {"x3", c.x3}};
  if (command == "limits")
    j["limits"] = {{"m1", c.initialMeans[0]},
                   {"m2", c.initialMeans[1]},
                   {"m3", c.initialMeans[2]},
                   {"x1", c.x1},
                   {"x2", c.x2},
                   {"x3", c.x3}};
  if (command == "validate")
    j["validate"] = {{"replicas", c.validateReplicas},
                     {"compensator_replicas", c.compensatorReplicas},
                     {"tv_factor", c.tvFactor}};
  return j;
}

struct Emitted {
  std::string file;
  std::size_t rows;
};

void write_manifest(const fs::path& outDir, const RunConfig& cfg,
                    const std::string& command, const std::vector<Emitted>& outputs,
                    const json& extra, double wallSeconds) {
  json m;
  m["artifact"] = "hemoscale";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = config_echo(cfg, command);
  json outs = json::array();
  for (const auto& e : outputs) outs.push_back({{"file", e.file}, {"rows", e.rows}});
  m["outputs"] = outs;
  for (const auto& [key, value] : extra.items()) m[key] = value;
  m["wall_time_seconds"] = wallSeconds;
  const fs::path p = outDir / (cfg.outPrefix + "_manifest.json");
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot open output file: " + p.string());
  out << m.dump(2) << '\n';
  out.flush();
  if (!out) fail(Errc::Io, "write failed: " + p.string());
}

fs::path prepare_out_dir(const std::string& outDir) {
  const fs::path p = outDir.empty() ? fs::path(".") : fs::path(outDir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) fail(Errc::Io, "cannot create output directory: " + p.string());
  return p;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SimulationConfig sim_config(const RunConfig& cfg) {
  SimulationConfig s;
  s.horizon = cfg.horizon;
  s.timeScale = cfg.timeScale;
  s.sampleGrid = cfg.grid;
  s.seed = cfg.seed;
  s.stream = 0;
  s.maxEvents = cfg.maxEvents;
  return s;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  const toml::Document doc = toml::parse_file(path);
  static const std::set<std::string> knownTables = {
      "",       "model",  "initial", "run",    "leap",
      "ensemble", "sweep", "sde",     "limits", "validate"};
  for (const auto& [name, table] : doc.tables)
    if (!knownTables.count(name)) fail(Errc::Config, "unknown table [" + name + "]");

  RunConfig cfg;
  if (const toml::Table* root = doc.find("")) {
    check_known_keys(*root, "", {"schema"});
    const std::int64_t schema = toml::get_int(*root, "schema", kConfigSchema);
    if (schema != kConfigSchema)
      fail(Errc::Config, "unsupported schema version " + std::to_string(schema));
  }

  const toml::Table* model = doc.find("model");
  if (!model) fail(Errc::Config, "missing [model] table");
  check_known_keys(*model, "model",
                   {"tau1", "tau2", "tau3", "gamma2", "gamma3", "K", "degenerate"});
  cfg.model = validate_params(
      toml::get_float(*model, "tau1", 1.0), toml::get_float(*model, "tau2", 1.0),
      toml::get_float(*model, "tau3", 1.0), toml::get_float(*model, "gamma2"),
      toml::get_float(*model, "gamma3"), toml::get_int(*model, "K"),
      toml::get_bool(*model, "degenerate", false));
  const DerivedRates rates = derive_rates(cfg.model);

  cfg.initial = PopulationState{cfg.model.K, 0, 0};
  if (const toml::Table* init = doc.find("initial")) {
    check_known_keys(*init, "initial", {"n1", "n2", "n3"});
    cfg.initial.n1 = toml::get_int(*init, "n1", cfg.model.K);
    cfg.initial.n2 = toml::get_int(*init, "n2", 0);
    cfg.initial.n3 = toml::get_int(*init, "n3", 0);
    if (cfg.initial.n1 < 0 || cfg.initial.n2 < 0 || cfg.initial.n3 < 0)
      fail(Errc::Config, "initial populations must be non-negative");
  }

  if (const toml::Table* run = doc.find("run")) {
    check_known_keys(*run, "run",
                     {"scale", "horizon", "grid_points", "grid", "seed", "max_events",
                      "out_prefix"});
    cfg.scaleName = toml::get_string(*run, "scale", "x");
    cfg.horizon = toml::get_float(*run, "horizon", 1.0);
    if (!(cfg.horizon > 0) || !std::isfinite(cfg.horizon))
      fail(Errc::Config, "horizon must be positive and finite");
    if (toml::has(*run, "grid")) {
      if (toml::has(*run, "grid_points"))
        fail(Errc::Config, "give either grid or grid_points, not both");
      cfg.grid = toml::get_float_array(*run, "grid");
      for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        if (!(cfg.grid[i] >= 0) || cfg.grid[i] > cfg.horizon)
          fail(Errc::Config, "grid points must lie in [0, horizon]");
        if (i > 0 && !(cfg.grid[i] > cfg.grid[i - 1]))
          fail(Errc::Config, "grid must be strictly increasing");
      }
      if (cfg.grid.empty()) fail(Errc::Config, "grid must be non-empty");
    } else {
      const std::int64_t points = toml::get_int(*run, "grid_points", 201);
      if (points < 2 || points > 2'000'000)
        fail(Errc::Config, "grid_points out of range");
      cfg.grid = uniform_grid(cfg.horizon, static_cast<int>(points));
    }
    const std::int64_t seed = toml::get_int(*run, "seed", 0);
    if (seed < 0) fail(Errc::Config, "seed must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.maxEvents = toml::get_int(*run, "max_events", cfg.maxEvents);
    if (cfg.maxEvents <= 0) fail(Errc::Config, "max_events must be positive");
    cfg.outPrefix = toml::get_string(*run, "out_prefix", "");
  } else {
    cfg.grid = uniform_grid(cfg.horizon, 201);
  }
  parse_scale(cfg.scaleName, cfg.timeScale, cfg.scaleKind);

  if (const toml::Table* leap = doc.find("leap")) {
    check_known_keys(*leap, "leap", {"enabled", "epsilon", "min_rate"});
    cfg.leapEnabled = toml::get_bool(*leap, "enabled", true);
    cfg.leap.epsilon = toml::get_float(*leap, "epsilon", cfg.leap.epsilon);
    cfg.leap.minRateForLeap = toml::get_float(*leap, "min_rate", cfg.leap.minRateForLeap);
    if (!(cfg.leap.epsilon > 0) || cfg.leap.epsilon >= 1)
      fail(Errc::Config, "leap epsilon must lie in (0, 1)");
    if (cfg.leap.minRateForLeap < 0) fail(Errc::Config, "leap min_rate must be >= 0");
  }

  if (const toml::Table* ens = doc.find("ensemble")) {
    check_known_keys(*ens, "ensemble", {"replicas"});
    const std::int64_t n = toml::get_int(*ens, "replicas", 100);
    if (n < 2 || n > 10'000'000) fail(Errc::Config, "ensemble replicas out of range");
    cfg.replicas = static_cast<int>(n);
  }

  if (const toml::Table* sweep = doc.find("sweep")) {
    check_known_keys(*sweep, "sweep", {"K", "replicas", "t", "grid_points", "statistic"});
    cfg.sweepK = toml::get_int_array(*sweep, "K");
    if (cfg.sweepK.size() < 3)
      fail(Errc::Config, "sweep needs at least 3 K values");
    for (std::size_t i = 0; i < cfg.sweepK.size(); ++i) {
      if (cfg.sweepK[i] < 2) fail(Errc::Config, "sweep K values must be >= 2");
      if (i > 0 && cfg.sweepK[i] <= cfg.sweepK[i - 1])
        fail(Errc::Config, "sweep K list must be strictly increasing");
    }
    const std::int64_t n = toml::get_int(*sweep, "replicas", 100);
    if (n < 2 || n > 1'000'000) fail(Errc::Config, "sweep replicas out of range");
    cfg.sweepReplicas = static_cast<int>(n);
    cfg.sweepT = toml::get_float(*sweep, "t", 1.0);
    if (!(cfg.sweepT > 0)) fail(Errc::Config, "sweep t must be positive");
    const std::int64_t gp = toml::get_int(*sweep, "grid_points", 201);
    if (gp < 2 || gp > 100'000) fail(Errc::Config, "sweep grid_points out of range");
    cfg.sweepGridPoints = static_cast<int>(gp);
    cfg.sweepStatistic = toml::get_string(*sweep, "statistic", "std_n3");
    if (cfg.sweepStatistic != "std_n3" && cfg.sweepStatistic != "v2_sup")
      fail(Errc::Config, "sweep statistic must be std_n3 or v2_sup");
  }

  cfg.x1 = static_cast<double>(cfg.initial.n1) / static_cast<double>(cfg.model.K);
  cfg.x2 = static_cast<double>(cfg.initial.n2) / rates.n2Scale;
  cfg.x3 = static_cast<double>(cfg.initial.n3) / rates.n3Scale;
  if (const toml::Table* sde = doc.find("sde")) {
    check_known_keys(*sde, "sde", {"dt", "sampler", "paths", "w2_mode", "x1", "x2", "x3"});
    cfg.sde.dt = toml::get_float(*sde, "dt", cfg.sde.dt);
    if (!(cfg.sde.dt > 0)) fail(Errc::Config, "sde dt must be positive");
    const std::string sampler = toml::get_string(*sde, "sampler", "exact");
    if (sampler == "exact") {
      cfg.sde.sampler = SdeSampler::ExactGaussian;
    } else if (sampler == "euler") {
      cfg.sde.sampler = SdeSampler::EulerMaruyama;
    } else {
      fail(Errc::Config, "sde sampler must be exact or euler");
    }
    const std::int64_t paths = toml::get_int(*sde, "paths", 1000);
    if (paths < 2 || paths > 1'000'000) fail(Errc::Config, "sde paths out of range");
    cfg.sdePaths = static_cast<int>(paths);
    const std::string mode = toml::get_string(*sde, "w2_mode", "literal");
    if (mode == "literal") {
      cfg.w2Mode = W2Mode::Literal;
    } else if (mode == "time_changed") {
      cfg.w2Mode = W2Mode::TimeChanged;
    } else {
      fail(Errc::Config, "w2_mode must be literal or time_changed");
    }
    cfg.x1 = toml::get_float(*sde, "x1", cfg.x1);
    cfg.x2 = toml::get_float(*sde, "x2", cfg.x2);
    cfg.x3 = toml::get_float(*sde, "x3", cfg.x3);
    if (!(cfg.x1 >= 0) || !(cfg.x2 >= 0) || !(cfg.x3 >= 0))
      fail(Errc::Config, "sde x1/x2/x3 must be non-negative");
  }

  cfg.initialMeans = {static_cast<double>(cfg.initial.n1),
                      static_cast<double>(cfg.initial.n2),
                      static_cast<double>(cfg.initial.n3)};
  if (const toml::Table* lim = doc.find("limits")) {
    check_known_keys(*lim, "limits", {"m1", "m2", "m3"});
    cfg.initialMeans[0] = toml::get_float(*lim, "m1", cfg.initialMeans[0]);
    cfg.initialMeans[1] = toml::get_float(*lim, "m2", cfg.initialMeans[1]);
    cfg.initialMeans[2] = toml::get_float(*lim, "m3", cfg.initialMeans[2]);
    for (double m : cfg.initialMeans)
      if (!(m >= 0) || !std::isfinite(m))
        fail(Errc::Config, "limits m1/m2/m3 must be non-negative and finite");
  }

  if (const toml::Table* val = doc.find("validate")) {
    check_known_keys(*val, "validate", {"replicas", "compensator_replicas", "tv_factor"});
    cfg.validateReplicas = toml::get_int(*val, "replicas", cfg.validateReplicas);
    if (cfg.validateReplicas < 1000 || cfg.validateReplicas > 10'000'000)
      fail(Errc::Config, "validate replicas out of range");
    const std::int64_t cr =
        toml::get_int(*val, "compensator_replicas", cfg.compensatorReplicas);
    if (cr < 30 || cr > 1'000'000)
      fail(Errc::Config, "validate compensator_replicas out of range");
    cfg.compensatorReplicas = static_cast<int>(cr);
    cfg.tvFactor = toml::get_float(*val, "tv_factor", cfg.tvFactor);
    if (!(cfg.tvFactor > 1.0)) fail(Errc::Config, "validate tv_factor must exceed 1");
  }

  return cfg;
}

RunConfig default_validate_config() {
  RunConfig cfg;
  cfg.model = validate_params(1.0, 1.0, 1.0, 0.5, 0.75, 4);
  cfg.initial = PopulationState{4, 0, 0};
  cfg.outPrefix = "validate";
  return cfg;
}

int cmd_simulate(const RunConfig& cfg, const std::string& outDir) {
  Timer timer;
  const fs::path dir = prepare_out_dir(outDir);
  SimulationConfig sim = sim_config(cfg);
  const Trajectory traj = cfg.leapEnabled
                              ? simulate_tau_leap(cfg.model, cfg.initial, sim, cfg.leap)
                              : simulate_exact(cfg.model, cfg.initial, sim);
  if (traj.truncated)
    fail(Errc::MaxEventsExceeded,
         "event budget exhausted at t = " + format_double(traj.terminalTime) +
             " after " + std::to_string(traj.eventCount) + " events");
  const RescaledPath path = rescale(traj, cfg.scaleKind);

  CsvWriter csv(dir / (cfg.outPrefix + "_trajectory.csv"),
                "time_rescaled,time_absolute,n1,n2,n3,x1,x2,x3");
  for (std::size_t i = 0; i < traj.gridRescaled.size(); ++i)
    csv.row({fmt(traj.gridRescaled[i]), fmt(traj.gridAbsolute[i]),
             fmt(traj.states[i].n1), fmt(traj.states[i].n2), fmt(traj.states[i].n3),
             fmt(path.comps[i][0]), fmt(path.comps[i][1]), fmt(path.comps[i][2])});
  csv.done();

  json extra;
  extra["method"] = cfg.leapEnabled ? "tau_leap" : "exact";
  extra["events"] = traj.eventCount;
  extra["terminal_time_absolute"] = traj.terminalTime;
  extra["final_state"] = {traj.finalState.n1, traj.finalState.n2, traj.finalState.n3};
  write_manifest(dir, cfg, "simulate", {{csv.name, csv.nRows}}, extra, timer.seconds());
  return 0;
}

int cmd_ensemble(const RunConfig& cfg, const std::string& outDir, int threads) {
  Timer timer;
  const fs::path dir = prepare_out_dir(outDir);
  const int resolved = resolve_threads(threads);
  const EnsembleStats st = run_ensemble(cfg.model, cfg.initial, sim_config(cfg),
                                        cfg.replicas, cfg.scaleKind, resolved);
  const DerivedRates rates = derive_rates(cfg.model);
  const double factor = time_scale_factor(cfg.timeScale, rates);

  std::string header = "time_rescaled,time_absolute";
  for (int c = 1; c <= 3; ++c) {
    const std::string x = "x" + std::to_string(c);
    for (const char* stat : {"mean_", "var_", "stderr_", "q05_", "q25_", "q50_", "q75_",
                             "q95_"})
      header += "," + std::string(stat) + x;
  }
  CsvWriter csv(dir / (cfg.outPrefix + "_stats.csv"), header);
  for (std::size_t g = 0; g < st.grid.size(); ++g) {
    std::vector<std::string> cells{fmt(st.grid[g]), fmt(st.grid[g] * factor)};
    for (int c = 0; c < 3; ++c) {
      cells.push_back(fmt(st.mean[c][g]));
      cells.push_back(fmt(st.variance[c][g]));
      cells.push_back(fmt(st.stderror[c][g]));
      cells.push_back(fmt(st.q05[c][g]));
      cells.push_back(fmt(st.q25[c][g]));
      cells.push_back(fmt(st.q50[c][g]));
      cells.push_back(fmt(st.q75[c][g]));
      cells.push_back(fmt(st.q95[c][g]));
    }
    csv.row(cells);
  }
  csv.done();

  json extra;
  extra["replicas"] = st.nReplicas;
  extra["threads"] = resolved;
  extra["total_events"] = st.totalEvents;
  write_manifest(dir, cfg, "ensemble", {{csv.name, csv.nRows}}, extra, timer.seconds());
  return 0;
}

int cmd_limits(const RunConfig& cfg, const std::string& outDir) {
  Timer timer;
  const fs::path dir = prepare_out_dir(outDir);
  const MeanCurve mean = make_mean_curve(cfg.model, cfg.initialMeans);
  const LimitCurveY y = make_limit_y(cfg.x1, cfg.x2, cfg.model.tau1, cfg.model.tau2);
  const LimitCurveZ z =
      make_limit_z(cfg.x1, cfg.x3, cfg.model.tau1, cfg.model.tau2, cfg.model.tau3);

  // one shared grid; the mean curve reads it as absolute time, y as gamma2
  // time, z as gamma3 time
  CsvWriter csv(dir / (cfg.outPrefix + "_curves.csv"), "t,en1,en2,en3,y1,y2,z1,z3");
  for (double t : cfg.grid) {
    const std::array<double, 3> m = mean(t);
    const std::array<double, 2> yv = y(t);
    const std::array<double, 2> zv = z(t);
    csv.row({fmt(t), fmt(m[0]), fmt(m[1]), fmt(m[2]), fmt(yv[0]), fmt(yv[1]),
             fmt(zv[0]), fmt(zv[1])});
  }
  csv.done();

  json extra;
  extra["beta_K"] = mean.betaK;
  extra["z2_star"] = z.z2Star;
  extra["time_columns"] = {{"en", "absolute"}, {"y", "gamma2"}, {"z", "gamma3"}};
  write_manifest(dir, cfg, "limits", {{csv.name, csv.nRows}}, extra, timer.seconds());
  return 0;
}

int cmd_fluct(const RunConfig& cfg, const std::string& outDir, int threads) {
  Timer timer;
  const fs::path dir = prepare_out_dir(outDir);
  const int resolved = resolve_threads(threads);
  if (cfg.grid.front() != 0.0)
    fail(Errc::Config, "fluct grid must start at 0");
  const DerivedRates rates = derive_rates(cfg.model);
  const ModelParams& m = cfg.model;

  SdeConfig sde = cfg.sde;
  sde.seed = cfg.seed;
  sde.stream = 0;
  const SdePath u0 = simulate_U(m.tau1, m.tau2, cfg.x1, {0, 0}, cfg.grid, sde);
  const SdePath w0 = simulate_W2(m.tau1, m.tau2, cfg.x1, cfg.x2, cfg.grid, sde,
                                 cfg.w2Mode);
  const SdePath v0 = simulate_V(m.tau1, m.tau3, cfg.x1, {0, 0}, cfg.grid, sde);

  std::vector<Emitted> outputs;
  {
    CsvWriter csv(dir / (cfg.outPrefix + "_u_path.csv"), "t,u1,u2");
    for (std::size_t i = 0; i < cfg.grid.size(); ++i)
      csv.row({fmt(cfg.grid[i]), fmt(u0.comps[i][0]), fmt(u0.comps[i][1])});
    csv.done();
    outputs.push_back({csv.name, csv.nRows});
  }
  {
    CsvWriter csv(dir / (cfg.outPrefix + "_w2_path.csv"), "t,w2");
    for (std::size_t i = 0; i < cfg.grid.size(); ++i)
      csv.row({fmt(cfg.grid[i]), fmt(w0.comps[i][0])});
    csv.done();
    outputs.push_back({csv.name, csv.nRows});
  }
  {
    CsvWriter csv(dir / (cfg.outPrefix + "_v_path.csv"), "t,v1,v3");
    for (std::size_t i = 0; i < cfg.grid.size(); ++i)
      csv.row({fmt(cfg.grid[i]), fmt(v0.comps[i][0]), fmt(v0.comps[i][1])});
    csv.done();
    outputs.push_back({csv.name, csv.nRows});
  }

  // path ensemble: per grid point, sample moments of (u1, u2, w2, v1, v3)
  const std::size_t G = cfg.grid.size();
  const std::size_t paths = static_cast<std::size_t>(cfg.sdePaths);
  if (paths * G > 50'000'000)
    fail(Errc::Config, "sde paths x grid_points too large to hold in memory");
  std::vector<std::array<double, 5>> vals(paths * G);
  for_each_replica(static_cast<int>(paths), resolved, [&](int r) {
    SdeConfig c = cfg.sde;
    c.seed = cfg.seed;
    c.stream = static_cast<std::uint64_t>(r);
    const SdePath u = simulate_U(m.tau1, m.tau2, cfg.x1, {0, 0}, cfg.grid, c);
    const SdePath w = simulate_W2(m.tau1, m.tau2, cfg.x1, cfg.x2, cfg.grid, c,
                                  cfg.w2Mode);
    const SdePath v = simulate_V(m.tau1, m.tau3, cfg.x1, {0, 0}, cfg.grid, c);
    for (std::size_t g = 0; g < G; ++g)
      vals[static_cast<std::size_t>(r) * G + g] = {u.comps[g][0], u.comps[g][1],
                                                   w.comps[g][0], v.comps[g][0],
                                                   v.comps[g][1]};
  });

  const LimitCurveY yCurve = make_limit_y(cfg.x1, cfg.x2, m.tau1, m.tau2);
  const double yInf = m.tau1 * cfg.x1 / m.tau2;
  const double sigma = std::sqrt(m.tau1 * cfg.x1);
  {
    std::string header = "t";
    for (const char* n : {"u1", "u2", "w2", "v1", "v3"})
      header += ",mean_" + std::string(n) + ",var_" + std::string(n);
    header += ",var_u1_exact,cov_u12_exact,var_u2_exact,var_w2_exact,var_v3_exact";
    CsvWriter csv(dir / (cfg.outPrefix + "_sde_ensemble.csv"), header);
    std::vector<double> col(paths), sq(paths);
    for (std::size_t g = 0; g < G; ++g) {
      std::vector<std::string> cells{fmt(cfg.grid[g])};
      for (int c = 0; c < 5; ++c) {
        for (std::size_t r = 0; r < paths; ++r) col[r] = vals[r * G + g][c];
        const double meanV = pairwise_sum(col) / static_cast<double>(paths);
        for (std::size_t r = 0; r < paths; ++r) {
          const double d = col[r] - meanV;
          sq[r] = d * d;
        }
        const double varV = pairwise_sum(sq) / static_cast<double>(paths - 1);
        cells.push_back(fmt(meanV));
        cells.push_back(fmt(varV));
      }
      const double t = cfg.grid[g];
      const Cov2 qu = analytic_linear_covariance({{{0, 0}, {m.tau1, -m.tau2}}},
                                                 {sigma, 0}, t);
      const Cov2 qv = analytic_linear_covariance({{{0, 0}, {m.tau1, -m.tau3}}},
                                                 {sigma, 0}, t);
      const double y2t = yCurve(t)[1];
      const double w2Var =
          cfg.w2Mode == W2Mode::Literal
              ? m.tau2 * std::max(0.0, y2t) * t
              : m.tau2 * (yInf * t + (cfg.x2 - yInf) * -std::expm1(-m.tau2 * t) / m.tau2);
      cells.push_back(fmt(qu.s11));
      cells.push_back(fmt(qu.s12));
      cells.push_back(fmt(qu.s22));
      cells.push_back(fmt(w2Var));
      cells.push_back(fmt(qv.s22));
      csv.row(cells);
    }
    csv.done();
    outputs.push_back({csv.name, csv.nRows});
  }

  // expansions along the stream-0 paths, reported in absolute time
  const LimitCurveZ zCurve = make_limit_z(cfg.x1, cfg.x3, m.tau1, m.tau2, m.tau3);
  {
    CsvWriter csv(dir / (cfg.outPrefix + "_expansion_n2.csv"),
                  "t_abs,t_gamma2,total,deterministic,gaussian,martingale");
    for (double s : cfg.grid) {
      const double tAbs = s * rates.kGamma2;
      const ExpansionTerms e = expansion_N2(m, yCurve, u0, w0, tAbs);
      csv.row({fmt(tAbs), fmt(s), fmt(e.total), fmt(e.deterministic), fmt(e.gaussian),
               fmt(e.martingale)});
    }
    csv.done();
    outputs.push_back({csv.name, csv.nRows});
  }
  {
    CsvWriter csv(dir / (cfg.outPrefix + "_expansion_n3.csv"),
                  "t_abs,t_gamma3,total,deterministic,gaussian");
    for (double s : cfg.grid) {
      const double tAbs = s * rates.kGamma3;
      const ExpansionTerms e = expansion_N3(m, zCurve, v0, tAbs);
      csv.row({fmt(tAbs), fmt(s), fmt(e.total), fmt(e.deterministic), fmt(e.gaussian)});
    }
    csv.done();
    outputs.push_back({csv.name, csv.nRows});
  }

  json extra;
  extra["paths"] = cfg.sdePaths;
  extra["threads"] = resolved;
  write_manifest(dir, cfg, "fluct", outputs, extra, timer.seconds());
  return 0;
}

int cmd_scaling_study(const RunConfig& cfg, const std::string& outDir, int threads) {
  Timer timer;
  const fs::path dir = prepare_out_dir(outDir);
  const int resolved = resolve_threads(threads);
  if (cfg.sweepK.empty()) fail(Errc::Config, "missing [sweep] table with K list");

  const bool wantStd = cfg.sweepStatistic == "std_n3";
  std::vector<std::pair<double, double>> points;
  std::vector<double> perKStat;
  double totalEvents = 0;

  for (std::size_t kIdx = 0; kIdx < cfg.sweepK.size(); ++kIdx) {
    const std::int64_t K = cfg.sweepK[kIdx];
    ModelParams p = cfg.model;
    p.K = K;
    p = validate_params(p.tau1, p.tau2, p.tau3, p.gamma2, p.gamma3, p.K, p.degenerate);
    const DerivedRates r = derive_rates(p);
    // initial condition follows the rescaled levels of the base config
    const PopulationState init{
        static_cast<std::int64_t>(std::llround(cfg.x1 * static_cast<double>(K))),
        static_cast<std::int64_t>(std::llround(cfg.x2 * r.n2Scale)),
        static_cast<std::int64_t>(std::llround(cfg.x3 * r.n3Scale))};

    SimulationConfig sim;
    sim.horizon = cfg.sweepT;
    sim.timeScale = TimeScale::Gamma3;
    sim.seed = cfg.seed;
    sim.maxEvents = cfg.maxEvents;
    sim.sampleGrid = wantStd ? std::vector<double>{cfg.sweepT}
                             : uniform_grid(cfg.sweepT, cfg.sweepGridPoints);

    const int n = cfg.sweepReplicas;
    std::vector<double> stat(n);
    std::vector<std::int64_t> events(n);
    for_each_replica(n, resolved, [&](int rep) {
      SimulationConfig c = sim;
      c.stream = static_cast<std::uint64_t>(kIdx) * static_cast<std::uint64_t>(n) +
                 static_cast<std::uint64_t>(rep);
      const Trajectory traj = simulate_exact(p, init, c);
      if (traj.truncated) {
        stat[rep] = -1;
        events[rep] = traj.eventCount;
        return;
      }
      events[rep] = traj.eventCount;
      if (wantStd) {
        stat[rep] = static_cast<double>(traj.states.back().n3);
      } else {
        stat[rep] = v2_sup_norm(rescale(traj, ScaleKind::Z), p);
      }
    });
    for (int rep = 0; rep < n; ++rep) {
      if (stat[rep] < 0 && wantStd)
        fail(Errc::MaxEventsExceeded,
             "K=" + std::to_string(K) + " replica " + std::to_string(rep) +
                 ": event budget exhausted");
      totalEvents += static_cast<double>(events[rep]);
    }

    double value;
    if (wantStd) {
      const double mean = pairwise_sum(stat) / static_cast<double>(n);
      std::vector<double> sq(n);
      for (int rep = 0; rep < n; ++rep) {
        const double d = stat[rep] - mean;
        sq[rep] = d * d;
      }
      value = std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1));
    } else {
      value = median_of(stat);
    }
    points.emplace_back(static_cast<double>(K), value);
    perKStat.push_back(value);
  }

  CsvWriter csv(dir / (cfg.outPrefix + "_points.csv"), "K,statistic,replicas");
  for (const auto& [K, value] : points)
    csv.row({fmt(static_cast<std::int64_t>(K)), fmt(value),
             fmt(static_cast<std::int64_t>(cfg.sweepReplicas))});
  csv.done();

  const ScalingFit fit = scaling_fit(points);
  bool monotoneDecreasing = true;
  for (std::size_t i = 1; i < perKStat.size(); ++i)
    if (!(perKStat[i] < perKStat[i - 1])) monotoneDecreasing = false;

  json fj;
  fj["statistic"] = cfg.sweepStatistic;
  fj["slope"] = fit.slope;
  fj["intercept"] = fit.intercept;
  fj["slope_stderr"] = fit.slopeStderr;
  fj["resid_stderr"] = fit.residStderr;
  fj["ci95_low"] = fit.ciLow;
  fj["ci95_high"] = fit.ciHigh;
  fj["n_points"] = fit.n;
  fj["monotone_decreasing"] = monotoneDecreasing;
  if (wantStd) {
    const double theory = 0.5 * (1 + 2 * cfg.model.gamma2 + 3 * cfg.model.gamma3);
    const double naive = 0.5 * (1 + cfg.model.gamma2 + cfg.model.gamma3);
    fj["exponent_theory"] = theory;
    fj["exponent_naive_clt"] = naive;
    fj["theory_in_ci"] = fit.ciLow <= theory && theory <= fit.ciHigh;
    fj["naive_clt_excluded"] = naive < fit.ciLow || naive > fit.ciHigh;
  }
  json pointsJson = json::array();
  for (const auto& [K, value] : points)
    pointsJson.push_back({{"K", static_cast<std::int64_t>(K)}, {"statistic", value}});
  fj["points"] = pointsJson;
  const fs::path fitPath = dir / (cfg.outPrefix + "_fit.json");
  {
    std::ofstream out(fitPath, std::ios::binary);
    if (!out) fail(Errc::Io, "cannot open output file: " + fitPath.string());
    out << fj.dump(2) << '\n';
    out.flush();
    if (!out) fail(Errc::Io, "write failed: " + fitPath.string());
  }

  json extra;
  extra["threads"] = resolved;
  extra["total_events"] = totalEvents;
  write_manifest(dir, cfg, "scaling-study",
                 {{csv.name, csv.nRows}, {fitPath.filename().string(), 1}}, extra,
                 timer.seconds());
  return 0;
}

int cmd_validate(const RunConfig& cfg, const std::string& outDir, int threads) {
  Timer timer;
  const fs::path dir = prepare_out_dir(outDir);
  const int resolved = resolve_threads(threads);

  // compensator diagnostics on a K=16 instance held near equilibrium
  const ModelParams pComp = validate_params(1.0, 1.0, 1.0, 0.5, 0.75, 16);
  SimulationConfig simComp;
  simComp.horizon = 3.0;
  simComp.timeScale = TimeScale::Unit;
  simComp.sampleGrid = {3.0};
  simComp.seed = cfg.seed;
  const EnsembleStats comp = run_ensemble(pComp, PopulationState{16, 0, 0}, simComp,
                                          cfg.compensatorReplicas, ScaleKind::X,
                                          resolved);
  const CompensatorReport rep = compensator_check(comp, pComp);
  const double zThreshold = 4.0;
  bool compPass = std::fabs(rep.zBracket1) < zThreshold;
  double zMax = std::fabs(rep.zBracket1);
  for (double z : rep.z) {
    zMax = std::max(zMax, std::fabs(z));
    if (!(std::fabs(z) < zThreshold)) compPass = false;
  }

  // transient law of a K=4 instance against the uniformization oracle
  const ModelParams pTv = validate_params(1.0, 1.0, 1.0, 0.5, 0.75, 4);
  const PopulationState initTv{4, 0, 0};
  const double tTv = 1.0;
  const OracleDistribution oracle =
      uniformization_oracle(pTv, initTv, tTv, {28, 44, 44});
  const std::size_t nTv = static_cast<std::size_t>(cfg.validateReplicas);
  std::vector<PopulationState> finals(nTv);
  for_each_replica(static_cast<int>(nTv), resolved, [&](int r) {
    SimulationConfig c;
    c.horizon = tTv;
    c.timeScale = TimeScale::Unit;
    c.seed = cfg.seed + 1;
    c.stream = static_cast<std::uint64_t>(r);
    finals[r] = simulate_exact(pTv, initTv, c).finalState;
  });
  const double tv = tv_distance(oracle, finals);
  const double floor = tv_noise_floor(oracle, nTv);
  const double tvBound = cfg.tvFactor * floor;
  const bool tvPass = tv < tvBound;
  const bool leakPass = oracle.leak < 1e-3;
  const bool pass = compPass && tvPass && leakPass;

  json report;
  report["pass"] = pass;
  json jc;
  jc["K"] = pComp.K;
  jc["replicas"] = cfg.compensatorReplicas;
  jc["horizon"] = simComp.horizon;
  jc["z"] = rep.z;
  jc["z_bracket1"] = rep.zBracket1;
  jc["z_max"] = zMax;
  jc["threshold"] = zThreshold;
  jc["pass"] = compPass;
  report["compensator"] = jc;
  json jo;
  jo["K"] = pTv.K;
  jo["t"] = tTv;
  jo["box"] = oracle.dims;
  jo["replicas"] = nTv;
  jo["tv"] = tv;
  jo["sampling_floor"] = floor;
  jo["tv_bound"] = tvBound;
  jo["tv_pass"] = tvPass;
  jo["leak"] = oracle.leak;
  jo["leak_bound"] = 1e-3;
  jo["leak_pass"] = leakPass;
  jo["uniformization_rate"] = oracle.lambda;
  jo["poisson_terms"] = oracle.terms;
  report["oracle"] = jo;

  const fs::path repPath = dir / (cfg.outPrefix + "_report.json");
  {
    std::ofstream out(repPath, std::ios::binary);
    if (!out) fail(Errc::Io, "cannot open output file: " + repPath.string());
    out << report.dump(2) << '\n';
    out.flush();
    if (!out) fail(Errc::Io, "write failed: " + repPath.string());
  }

  json extra;
  extra["threads"] = resolved;
  extra["pass"] = pass;
  write_manifest(dir, cfg, "validate", {{repPath.filename().string(), 1}}, extra,
                 timer.seconds());
  std::cout << (pass ? "validate: PASS" : "validate: FAIL") << " (tv " << format_double(tv)
            << " vs bound " << format_double(tvBound) << ", max |z| "
            << format_double(zMax) << ")\n";
  return pass ? 0 : 4;
}

int run_command(const CliOptions& opts) {
  try {
    RunConfig cfg;
    if (!opts.configPath.empty()) {
      cfg = load_run_config(opts.configPath);
    } else if (opts.command == "validate") {
      cfg = default_validate_config();
    } else {
      fail(Errc::Config, "--config is required for " + opts.command);
    }
    if (opts.hasSeedOverride) cfg.seed = opts.seedOverride;
    if (cfg.outPrefix.empty()) cfg.outPrefix = opts.command == "scaling-study"
                                                   ? "scaling"
                                                   : opts.command;

    if (opts.command == "simulate") return cmd_simulate(cfg, opts.outDir);
    if (opts.command == "ensemble") return cmd_ensemble(cfg, opts.outDir, opts.threads);
    if (opts.command == "limits") return cmd_limits(cfg, opts.outDir);
    if (opts.command == "fluct") return cmd_fluct(cfg, opts.outDir, opts.threads);
    if (opts.command == "scaling-study")
      return cmd_scaling_study(cfg, opts.outDir, opts.threads);
    if (opts.command == "validate") return cmd_validate(cfg, opts.outDir, opts.threads);
    fail(Errc::Config, "unknown command: " + opts.command);
  } catch (const Error& e) {
    std::cerr << "hemoscale: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "hemoscale: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace hemo
