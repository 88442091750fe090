#include "cfsim.h"

#include <fstream>
#include <string>

#include "cfsim/config.hpp"
#include "cfsim/harness.hpp"
#include "cfsim/selfcheck.hpp"

struct cfsim_sim {
  cfsim::SimConfig config;
  std::string error;
  std::string describe_buf;
  std::string csv_buf;
  std::string report_buf;
  bool has_results = false;
};

namespace {

thread_local std::string g_create_error;

cfsim_status classify(const std::exception& e, std::string* msg) {
  *msg = e.what();
  if (dynamic_cast<const cfsim::ConfigError*>(&e) != nullptr ||
      dynamic_cast<const cfsim::ValidationError*>(&e) != nullptr) {
    return CFSIM_ERR_CONFIG;
  }
  if (dynamic_cast<const cfsim::CapacityError*>(&e) != nullptr) {
    return CFSIM_ERR_CAPACITY;
  }
  if (dynamic_cast<const cfsim::NumericError*>(&e) != nullptr) {
    return CFSIM_ERR_NUMERIC;
  }
  if (dynamic_cast<const cfsim::PipelineError*>(&e) != nullptr) {
    return CFSIM_ERR_PIPELINE;
  }
  if (dynamic_cast<const cfsim::IoError*>(&e) != nullptr) {
    return CFSIM_ERR_IO;
  }
  return CFSIM_ERR_INTERNAL;
}

template <typename Fn>
cfsim_status guarded(cfsim_sim* sim, Fn&& fn) {
  if (sim == nullptr) return CFSIM_ERR_INVALID_ARGUMENT;
  try {
    fn();
    sim->error.clear();
    return CFSIM_OK;
  } catch (const std::exception& e) {
    return classify(e, &sim->error);
  } catch (...) {
    sim->error = "unknown error";
    return CFSIM_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* cfsim_version(void) { return "1.0.0"; }

const char* cfsim_status_name(cfsim_status status) {
  switch (status) {
    case CFSIM_OK: return "ok";
    case CFSIM_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CFSIM_ERR_CONFIG: return "config_error";
    case CFSIM_ERR_CAPACITY: return "capacity_error";
    case CFSIM_ERR_NUMERIC: return "numeric_error";
    case CFSIM_ERR_PIPELINE: return "pipeline_error";
    case CFSIM_ERR_IO: return "io_error";
    case CFSIM_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* cfsim_error(const cfsim_sim* sim) {
  return sim == nullptr ? "" : sim->error.c_str();
}

const char* cfsim_global_error(void) { return g_create_error.c_str(); }

cfsim_status cfsim_create(const char* config_json, cfsim_sim** out) {
  if (out == nullptr) return CFSIM_ERR_INVALID_ARGUMENT;
  *out = nullptr;
  try {
    auto sim = std::make_unique<cfsim_sim>();
    const std::string text =
        config_json == nullptr || config_json[0] == '\0' ? "{}" : config_json;
    sim->config = cfsim::SimConfig::from_json(text);
    *out = sim.release();
    g_create_error.clear();
    return CFSIM_OK;
  } catch (const std::exception& e) {
    return classify(e, &g_create_error);
  }
}

cfsim_status cfsim_create_from_file(const char* path, cfsim_sim** out) {
  if (out == nullptr || path == nullptr) return CFSIM_ERR_INVALID_ARGUMENT;
  *out = nullptr;
  try {
    auto sim = std::make_unique<cfsim_sim>();
    sim->config = cfsim::SimConfig::from_file(path);
    *out = sim.release();
    g_create_error.clear();
    return CFSIM_OK;
  } catch (const std::exception& e) {
    return classify(e, &g_create_error);
  }
}

void cfsim_destroy(cfsim_sim* sim) { delete sim; }

cfsim_status cfsim_set_seed(cfsim_sim* sim, uint64_t seed) {
  return guarded(sim, [&] { sim->config.seed = seed; });
}

cfsim_status cfsim_set_threads(cfsim_sim* sim, int threads) {
  return guarded(sim, [&] {
    if (threads < 1) throw cfsim::ConfigError("threads must be >= 1");
    sim->config.threads = threads;
  });
}

cfsim_status cfsim_set_detectors(cfsim_sim* sim, const char* comma_list) {
  return guarded(sim, [&] {
    if (comma_list == nullptr) {
      throw cfsim::ConfigError("detector list is null");
    }
    sim->config.detectors = cfsim::DetectorSpec::parse_list(comma_list);
    sim->config.validate();
  });
}

const char* cfsim_describe(cfsim_sim* sim) {
  if (sim == nullptr) return "";
  const cfsim_status st =
      guarded(sim, [&] { sim->describe_buf = sim->config.to_json(); });
  return st == CFSIM_OK ? sim->describe_buf.c_str() : "";
}

cfsim_status cfsim_run_sweep(cfsim_sim* sim) {
  return guarded(sim, [&] {
    const std::vector<cfsim::FerRecord> records = cfsim::run_sweep(sim->config);
    sim->csv_buf =
        cfsim::records_to_csv(records, sim->config.csv_wall_seconds);
    sim->has_results = true;
  });
}

const char* cfsim_csv(const cfsim_sim* sim) {
  if (sim == nullptr || !sim->has_results) return "";
  return sim->csv_buf.c_str();
}

cfsim_status cfsim_write_csv(cfsim_sim* sim, const char* path) {
  return guarded(sim, [&] {
    if (path == nullptr) throw cfsim::ConfigError("output path is null");
    if (!sim->has_results) {
      throw cfsim::PipelineError("run the sweep before writing results");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cfsim::IoError("cannot open '" + std::string(path) + "'");
    out << sim->csv_buf;
    if (!out) {
      throw cfsim::IoError("write to '" + std::string(path) + "' failed");
    }
  });
}

cfsim_status cfsim_validate(cfsim_sim* sim, int* checks_failed) {
  return guarded(sim, [&] {
    const std::vector<cfsim::CheckResult> results = cfsim::run_selfcheck();
    sim->report_buf = cfsim::format_selfcheck(results);
    int failed = 0;
    for (const cfsim::CheckResult& r : results) {
      if (!r.pass) ++failed;
    }
    if (checks_failed != nullptr) *checks_failed = failed;
  });
}

const char* cfsim_report(const cfsim_sim* sim) {
  return sim == nullptr ? "" : sim->report_buf.c_str();
}

}  // extern "C"
