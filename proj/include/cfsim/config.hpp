#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfsim/association.hpp"
#include "cfsim/coding.hpp"
#include "cfsim/common.hpp"
#include "cfsim/geometry.hpp"
#include "cfsim/pilots.hpp"

namespace cfsim {

// Detector selection: mrc | zf_df | mmse_sic | exact_ml | pm(r) | c_pm(r).
struct DetectorSpec {
  enum class Kind { kMrc, kZfDf, kMmseSic, kPm, kExactMl, kCPm };
  Kind kind = Kind::kPm;
  int r = 0;  // pm / c_pm only

  std::string name() const;  // base name, e.g. "pm"
  std::string id() const;    // canonical form, e.g. "pm(4)"

  static DetectorSpec parse(const std::string& s);
  static std::vector<DetectorSpec> parse_list(const std::string& comma_list);
};

struct SimConfig {
  // geometry
  double side_m = 1000.0;
  int m_aps = 50;
  int k_users = 20;
  int n_ap_antennas = 8;
  double carrier_hz = 1.9e9;
  double bandwidth_hz = 20e6;
  double noise_figure_db = 9.0;
  double noise_psd_dbm_hz = -174.0;
  PathLossParams path_loss;
  ShadowingParams shadowing;

  // pilots
  int tau_p = 12;
  double p_tilde_mw = 100.0;
  PilotPolicy pilot_policy = PilotPolicy::kRoundRobin;

  // association and uplink power control
  std::vector<int> n_serve = {4, 8};  // config key "N"
  double p_max_mw = 100.0;
  double p0_dbmw = -10.0;
  double kappa = 0.5;

  // outer code
  CodeConfig code;

  // sweep
  std::vector<double> snr_points_db = {0, 5, 10, 15, 20, 25, 30};
  int target_frame_errors = 200;
  long max_frames = 1000000;
  std::uint64_t seed = 1;
  std::vector<DetectorSpec> detectors;
  int threads = 1;
  int drops = 1;
  bool probe_user_center = true;
  bool per_user_fer = false;
  bool csv_wall_seconds = false;

  // diagnostics / overrides
  double sigma2_w_override_w = -1.0;  // < 0: derive from PSD, bandwidth, NF
  bool perfect_csi = false;
  int exact_ml_cap_bits = 24;

  double sigma2_w() const;
  FpcParams fpc_params() const;

  void validate() const;
  std::string to_json() const;  // resolved config, parseable back

  static SimConfig defaults();
  static SimConfig from_json(const std::string& text);
  static SimConfig from_file(const std::string& path);
};

}  // namespace cfsim
