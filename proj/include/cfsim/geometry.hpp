#pragma once

#include <vector>

#include "cfsim/common.hpp"
#include "cfsim/rng.hpp"

namespace cfsim {

struct PathLossParams {
  double a_db = 140.7;   // PL(d) = a_db + b_db * log10(d / 1 km)
  double b_db = 36.7;
  double d_min_m = 10.0; // distances below this clamp to d_min_m
};

struct ShadowingParams {
  double sigma_db = 8.0;
  double corr_distance_m = 100.0; // E[s_k s_j] = sigma^2 * 2^(-d(k,j)/corr_distance)
};

// Square service area wrapped at the edges, APs and single-antenna users.
struct Deployment {
  double side_m = 1000.0;
  std::vector<Eigen::Vector2d> ap_positions;
  std::vector<Eigen::Vector2d> user_positions;
  int n_ap_antennas = 8;
  double carrier_hz = 1.9e9;
  double bandwidth_hz = 20e6;
  double noise_figure_db = 9.0;
  double noise_psd_dbm_hz = -174.0;

  int num_aps() const { return static_cast<int>(ap_positions.size()); }
  int num_users() const { return static_cast<int>(user_positions.size()); }

  // Thermal noise power over the configured bandwidth, in watts.
  double noise_power_w() const;
};

// Uniform i.i.d. placement over the square; when pin_user0_center is set the
// first user is placed at the centre of the area (the probe user).
Deployment make_deployment(int m_aps, int k_users, int n_ap_antennas,
                           double side_m, double carrier_hz,
                           double bandwidth_hz, double noise_figure_db,
                           double noise_psd_dbm_hz, bool pin_user0_center,
                           Rng& rng);

// Distance on the torus: minimum over the 9 wrap shifts, taken per axis.
double wrap_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                     double side_m);

double path_loss_db(double d_m, const PathLossParams& p);

// Large-scale coefficients beta (linear) and the shadow map (dB) they used.
struct LargeScaleMap {
  Mat beta;       // M x K, strictly positive
  Mat shadow_db;  // M x K
  int num_aps() const { return static_cast<int>(beta.rows()); }
  int num_users() const { return static_cast<int>(beta.cols()); }
};

// Zero-mean lognormal shadowing (values in dB), correlated across the users
// seen by one AP with an exponential distance decay, independent across APs.
// A covariance that fails Cholesky is projected to the nearest PSD matrix and
// a warning is logged.
Mat draw_shadowing(const Deployment& dep, Rng& rng, const ShadowingParams& p);

LargeScaleMap build_large_scale(const Deployment& dep, const PathLossParams& p,
                                const Mat& shadow_db);

// Per-link spatial correlation matrices R_{k,m} with tr(R)/N_ap = beta_{k,m},
// plus cached factors F with F F^H = R for channel sampling.
class CorrelationSet {
 public:
  CorrelationSet() = default;
  CorrelationSet(int m_aps, int k_users, int n_ap);

  int num_aps() const { return m_; }
  int num_users() const { return k_; }
  int n_ap() const { return n_ap_; }

  const CMat& r(int k, int m) const { return r_[index(k, m)]; }
  const CMat& sqrt_factor(int k, int m) const { return f_[index(k, m)]; }
  double beta(int k, int m) const { return r(k, m).trace().real() / n_ap_; }

  void set(int k, int m, const CMat& r);

 private:
  int index(int k, int m) const { return m * k_ + k; }
  int m_ = 0;
  int k_ = 0;
  int n_ap_ = 0;
  std::vector<CMat> r_;
  std::vector<CMat> f_;
};

// Uncorrelated antennas: R_{k,m} = beta_{k,m} * I.
CorrelationSet build_correlations(const LargeScaleMap& ls, int n_ap);

// Custom mode: a user-supplied normalized template T (Hermitian PSD with
// tr(T)/N_ap = 1) applied as R_{k,m} = beta_{k,m} * T. A template failing the
// Hermitian/PSD/trace checks raises ValidationError.
CorrelationSet build_correlations(const LargeScaleMap& ls, int n_ap,
                                  const CMat& normalized_template);

// Small-scale realizations g_{k,m} ~ CN(0, R_{k,m}), independent across links.
struct ChannelRealization {
  int m_aps = 0;
  int k_users = 0;
  std::vector<CVec> g;  // index m * K + k

  const CVec& of(int k, int m) const { return g[m * k_users + k]; }
  CVec& of(int k, int m) { return g[m * k_users + k]; }
};

ChannelRealization draw_channels(const CorrelationSet& corr, Rng& rng);

}  // namespace cfsim
