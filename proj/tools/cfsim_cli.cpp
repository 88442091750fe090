// Command-line front end for the cfsim shared library. Talks to the simulator
// exclusively through the C API in cfsim.h.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "cfsim.h"

namespace {

struct SimDeleter {
  void operator()(cfsim_sim* sim) const { cfsim_destroy(sim); }
};
using SimPtr = std::unique_ptr<cfsim_sim, SimDeleter>;

SimPtr open_sim(const std::string& config_path, int* exit_code) {
  cfsim_sim* raw = nullptr;
  const cfsim_status st =
      config_path.empty() ? cfsim_create("{}", &raw)
                          : cfsim_create_from_file(config_path.c_str(), &raw);
  if (st != CFSIM_OK) {
    std::fprintf(stderr, "cfsim: %s: %s\n", cfsim_status_name(st),
                 cfsim_global_error());
    *exit_code = 2;
    return nullptr;
  }
  return SimPtr(raw);
}

int apply_overrides(cfsim_sim* sim, bool has_seed, std::uint64_t seed,
                    int threads, const std::string& detectors) {
  cfsim_status st = CFSIM_OK;
  if (has_seed) st = cfsim_set_seed(sim, seed);
  if (st == CFSIM_OK && threads > 0) st = cfsim_set_threads(sim, threads);
  if (st == CFSIM_OK && !detectors.empty()) {
    st = cfsim_set_detectors(sim, detectors.c_str());
  }
  if (st != CFSIM_OK) {
    std::fprintf(stderr, "cfsim: %s: %s\n", cfsim_status_name(st),
                 cfsim_error(sim));
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cfsim — cell-free massive MIMO uplink FER simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string detectors;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int threads = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (JSON)");
    cmd->add_option("--seed", seed, "override the RNG seed")
        ->each([&](const std::string&) { has_seed = true; });
    cmd->add_option("--threads", threads, "override the worker thread count");
    cmd->add_option("--detectors", detectors,
                    "override the detector list, e.g. mrc,pm(4),c_pm(4)");
  };

  CLI::App* sweep = app.add_subcommand(
      "sweep", "run the FER-vs-SNR sweep and emit CSV records");
  add_common(sweep);
  sweep->add_option("--out", out_path, "CSV output path (default stdout)");

  CLI::App* validate = app.add_subcommand(
      "validate", "run the built-in oracle/invariant suite");
  add_common(validate);

  CLI::App* describe =
      app.add_subcommand("describe", "print the resolved configuration");
  add_common(describe);

  CLI11_PARSE(app, argc, argv);

  int exit_code = 0;
  SimPtr sim = open_sim(config_path, &exit_code);
  if (!sim) return exit_code;
  if (int rc = apply_overrides(sim.get(), has_seed, seed, threads, detectors);
      rc != 0) {
    return rc;
  }

  if (describe->parsed()) {
    std::fputs(cfsim_describe(sim.get()), stdout);
    return 0;
  }

  if (validate->parsed()) {
    int failed = 0;
    const cfsim_status st = cfsim_validate(sim.get(), &failed);
    if (st != CFSIM_OK) {
      std::fprintf(stderr, "cfsim: %s: %s\n", cfsim_status_name(st),
                   cfsim_error(sim.get()));
      return 2;
    }
    std::fputs(cfsim_report(sim.get()), stdout);
    return failed == 0 ? 0 : 1;
  }

  // sweep
  const cfsim_status st = cfsim_run_sweep(sim.get());
  if (st != CFSIM_OK) {
    std::fprintf(stderr, "cfsim: %s: %s\n", cfsim_status_name(st),
                 cfsim_error(sim.get()));
    return 2;
  }
  if (out_path.empty()) {
    std::fputs(cfsim_csv(sim.get()), stdout);
  } else {
    const cfsim_status wst = cfsim_write_csv(sim.get(), out_path.c_str());
    if (wst != CFSIM_OK) {
      std::fprintf(stderr, "cfsim: %s: %s\n", cfsim_status_name(wst),
                   cfsim_error(sim.get()));
      return 2;
    }
  }
  return 0;
}
