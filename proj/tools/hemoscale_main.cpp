#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hemoscale/hemoscale.h"

int main(int argc, char** argv) {
  CLI::App app{
      "hemoscale: exact stochastic simulation and multi-scale analysis of a "
      "three-compartment renewal/differentiation chain"};
  app.set_version_flag("--version", HEMOSCALE_VERSION);
  app.require_subcommand(1);

  std::string config;
  std::string outDir = ".";
  std::uint64_t seed = 0;
  int threads = 0;

  struct SubSpec {
    const char* name;
    const char* desc;
    bool configRequired;
  };
  const std::vector<SubSpec> specs = {
      {"simulate", "run one trajectory and write its sampled path", true},
      {"ensemble", "run replicas and write per-time statistics", true},
      {"limits", "evaluate the closed-form mean and limit curves", true},
      {"fluct", "sample the limit SDEs and the fluctuation expansions", true},
      {"scaling-study", "sweep K and fit the fluctuation scaling exponent", true},
      {"validate", "check the engine against built-in diagnostics", false},
  };
  for (const SubSpec& spec : specs) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.desc);
    CLI::Option* copt =
        sub->add_option("--config", config, "TOML run configuration")
            ->check(CLI::ExistingFile);
    if (spec.configRequired) copt->required();
    sub->add_option("--seed", seed, "override the seed from the config");
    sub->add_option("--out", outDir, "output directory (created if missing)");
    sub->add_option("--threads", threads,
                    "worker threads; 0 uses HEMOSCALE_THREADS, then hardware");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad invocation is a config error
  }

  CLI::App* sub = app.get_subcommands().front();
  const bool hasSeed = sub->count("--seed") > 0;

  int exitCode = 0;
  const hemo_status st = hemo_run_command(
      sub->get_name().c_str(), config.empty() ? nullptr : config.c_str(),
      outDir.c_str(), hasSeed ? 1 : 0, seed, threads, &exitCode);
  if (st != HEMO_OK) {
    std::fprintf(stderr, "hemoscale: %s (%s)\n", hemo_last_error(),
                 hemo_status_name(st));
    return 2;
  }
  return exitCode;
}
