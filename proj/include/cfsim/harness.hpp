#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfsim/config.hpp"
#include "cfsim/detectors.hpp"
#include "cfsim/uplink.hpp"

namespace cfsim {

// User 0 is the probe: pinned to the centre of the area (when configured) and
// the one whose frame errors drive the sweep records.
inline constexpr int kProbeUser = 0;

// Static per-drop state: geometry, large-scale statistics, pilot assignment
// and the MMSE estimator operators (all independent of N, detector and the
// probe power).
struct DropCore {
  Deployment dep;
  LargeScaleMap ls;
  CorrelationSet corr;
  PilotBook pilots;
  TrainingPowers train_powers;
  PerLink<CMat> gamma;
  PerLink<CMat> c;     // estimation-error covariances (zero under perfect CSI)
  PerLink<CMat> proj;  // ghat = proj * yhat
  double sigma2_w = 0.0;
  bool perfect_csi = false;
};

DropCore build_drop(const SimConfig& cfg, int drop_idx);

// Association, FPC powers and per-AP interference variances for one serve
// count N. The probe power (and hence sigma2_e) changes per SNR point.
struct Scenario {
  int n_serve = 0;
  AssociationMap assoc;
  UplinkPowers powers;
  std::vector<double> sigma2_e;  // per AP
};

Scenario build_scenario(const SimConfig& cfg, const DropCore& core,
                        int n_serve);

// SNR_k = eta_k N_AP sum_{m in M_k} beta_{k,m} / sigma2_w, in dB.
// eta = 0 reports -inf.
double snr_k(int k, const UplinkPowers& powers, const AssociationMap& assoc,
             const Mat& beta, double sigma2_w, int n_ap);

// Scales the probe user's transmit power so snr_k(probe) hits snr_db (the
// P_max clamp is not applied to the probe) and refreshes sigma2_e.
void set_probe_snr(const SimConfig& cfg, const DropCore& core, Scenario& sc,
                   double snr_db);

// Per-trial LLR bookkeeping: local[ap][user] holds one AP's per-coded-bit
// LLRs for a user (size 0 when absent), fused[user] the CPU-side sum.
struct LlrFrame {
  std::vector<std::vector<Vec>> local;
  std::vector<Vec> fused;
};

// Plain sum of the serving APs' contributions; a missing contribution is a
// pipeline ordering bug. The uncoded hard decision is sign(fused) > 0 -> 1.
Vec fuse_llrs(const LlrFrame& frame, int user, const std::vector<int>& serving);

struct TrialResult {
  std::vector<int> users;         // decoded users
  std::vector<char> frame_error;  // per decoded user
  std::uint64_t op_count = 0;
  long clamp_hits = 0;  // local LLRs with |L| >= 80

  bool error_for(int user) const;
};

// One Monte Carlo frame: fresh channels, pilot training and MMSE estimation,
// one coded frame per user over one channel realization, per-symbol detection
// at each relevant AP, fusion, Viterbi decoding. Users in outage are flagged
// as frame errors.
TrialResult run_trial(const SimConfig& cfg, const DropCore& core,
                      const Scenario& sc, const DetectorSpec& det,
                      int drop_idx, long trial_idx,
                      const std::vector<int>& users_to_decode);

struct FerRecord {
  std::string detector;
  int r = 0;
  int n_serve = 0;
  double snr_db = 0.0;
  long frames = 0;
  long frame_errors = 0;
  double fer = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t op_count = 0;
  bool low_confidence = false;  // max_frames hit before the error target
};

// Full sweep over (detector, N, SNR): accumulates frames until
// target_frame_errors probe errors or max_frames, with common random numbers
// across detectors and deterministic results for a fixed config + seed.
std::vector<FerRecord> run_sweep(const SimConfig& cfg);

// CSV with the pinned column order; wall_seconds prints as 0.000 unless
// include_wall_seconds is set (timings are not deterministic).
std::string records_to_csv(const std::vector<FerRecord>& records,
                           bool include_wall_seconds);

}  // namespace cfsim
