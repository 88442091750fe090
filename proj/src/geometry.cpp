#include "cfsim/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace cfsim {

double Deployment::noise_power_w() const {
  const double noise_dbm =
      noise_psd_dbm_hz + linear_to_db(bandwidth_hz) + noise_figure_db;
  return dbm_to_watts(noise_dbm);
}

Deployment make_deployment(int m_aps, int k_users, int n_ap_antennas,
                           double side_m, double carrier_hz,
                           double bandwidth_hz, double noise_figure_db,
                           double noise_psd_dbm_hz, bool pin_user0_center,
                           Rng& rng) {
  if (m_aps < 1 || k_users < 1 || n_ap_antennas < 1 || side_m <= 0.0) {
    throw ConfigError("deployment needs M >= 1, K >= 1, N_AP >= 1, side_m > 0");
  }
  Deployment dep;
  dep.side_m = side_m;
  dep.n_ap_antennas = n_ap_antennas;
  dep.carrier_hz = carrier_hz;
  dep.bandwidth_hz = bandwidth_hz;
  dep.noise_figure_db = noise_figure_db;
  dep.noise_psd_dbm_hz = noise_psd_dbm_hz;
  dep.ap_positions.reserve(m_aps);
  for (int m = 0; m < m_aps; ++m) {
    dep.ap_positions.emplace_back(rng.uniform(0.0, side_m),
                                  rng.uniform(0.0, side_m));
  }
  dep.user_positions.reserve(k_users);
  for (int k = 0; k < k_users; ++k) {
    dep.user_positions.emplace_back(rng.uniform(0.0, side_m),
                                    rng.uniform(0.0, side_m));
  }
  if (pin_user0_center) {
    dep.user_positions[0] = Eigen::Vector2d(side_m / 2.0, side_m / 2.0);
  }
  return dep;
}

double wrap_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                     double side_m) {
  // Minimizing over the 9 shifts factors per axis because sqrt is monotone
  // in each squared coordinate.
  double dx = std::abs(a.x() - b.x());
  double dy = std::abs(a.y() - b.y());
  dx = std::min(dx, side_m - dx);
  dy = std::min(dy, side_m - dy);
  return std::hypot(dx, dy);
}

double path_loss_db(double d_m, const PathLossParams& p) {
  if (p.d_min_m <= 0.0 || p.b_db < 0.0) {
    throw ConfigError("path loss model needs d_min_m > 0 and b_db >= 0");
  }
  const double d = std::max(d_m, p.d_min_m);
  return p.a_db + p.b_db * std::log10(d / 1000.0);
}

Mat draw_shadowing(const Deployment& dep, Rng& rng,
                   const ShadowingParams& p) {
  if (p.sigma_db < 0.0 || p.corr_distance_m <= 0.0) {
    throw ConfigError("shadowing needs sigma_db >= 0 and corr_distance_m > 0");
  }
  const int m_aps = dep.num_aps();
  const int k_users = dep.num_users();
  Mat shadow = Mat::Zero(m_aps, k_users);
  if (p.sigma_db == 0.0) return shadow;

  const double var = p.sigma_db * p.sigma_db;
  Mat cov(k_users, k_users);
  for (int i = 0; i < k_users; ++i) {
    for (int j = 0; j < k_users; ++j) {
      const double d =
          wrap_distance(dep.user_positions[i], dep.user_positions[j],
                        dep.side_m);
      cov(i, j) = var * std::exp2(-d / p.corr_distance_m);
    }
  }

  Mat factor;
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    // Nearest-PSD projection: clip negative eigenvalues.
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    Vec ev = es.eigenvalues().cwiseMax(0.0);
    factor = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
    log_warn("shadowing covariance not PD; using nearest-PSD projection");
  }

  Vec z(k_users);
  for (int m = 0; m < m_aps; ++m) {
    for (int k = 0; k < k_users; ++k) z(k) = rng.normal();
    shadow.row(m) = (factor * z).transpose();
  }
  return shadow;
}

LargeScaleMap build_large_scale(const Deployment& dep, const PathLossParams& p,
                                const Mat& shadow_db) {
  const int m_aps = dep.num_aps();
  const int k_users = dep.num_users();
  LargeScaleMap ls;
  ls.beta = Mat(m_aps, k_users);
  ls.shadow_db = shadow_db;
  for (int m = 0; m < m_aps; ++m) {
    for (int k = 0; k < k_users; ++k) {
      const double d = wrap_distance(dep.ap_positions[m],
                                     dep.user_positions[k], dep.side_m);
      const double beta_db = -path_loss_db(d, p) + shadow_db(m, k);
      ls.beta(m, k) = db_to_linear(beta_db);
    }
  }
  return ls;
}

namespace {

CMat psd_sqrt_factor(const CMat& r) {
  if (r.isZero(0.0)) return CMat::Zero(r.rows(), r.cols());
  Eigen::LLT<CMat> llt(r);
  if (llt.info() == Eigen::Success) return CMat(llt.matrixL());
  Eigen::SelfAdjointEigenSolver<CMat> es(r);
  Vec ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

void validate_template(const CMat& t, int n_ap) {
  if (t.rows() != n_ap || t.cols() != n_ap) {
    throw ValidationError("correlation template has wrong dimensions");
  }
  const double scale = std::max(1.0, t.cwiseAbs().maxCoeff());
  if (((t - t.adjoint()).cwiseAbs().maxCoeff()) > 1e-12 * scale) {
    throw ValidationError("correlation template is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(t);
  if (es.eigenvalues().minCoeff() < -1e-10) {
    throw ValidationError("correlation template is not PSD");
  }
  const double tr_over_n = t.trace().real() / n_ap;
  if (std::abs(tr_over_n - 1.0) > 1e-9) {
    throw ValidationError(
        "correlation template must satisfy tr(T)/N_AP = 1, got " +
        std::to_string(tr_over_n));
  }
}

}  // namespace

CorrelationSet::CorrelationSet(int m_aps, int k_users, int n_ap)
    : m_(m_aps), k_(k_users), n_ap_(n_ap), r_(m_aps * k_users),
      f_(m_aps * k_users) {}

void CorrelationSet::set(int k, int m, const CMat& r) {
  r_[index(k, m)] = r;
  f_[index(k, m)] = psd_sqrt_factor(r);
}

CorrelationSet build_correlations(const LargeScaleMap& ls, int n_ap) {
  const int m_aps = ls.num_aps();
  const int k_users = ls.num_users();
  CorrelationSet set(m_aps, k_users, n_ap);
  for (int m = 0; m < m_aps; ++m) {
    for (int k = 0; k < k_users; ++k) {
      const double beta = ls.beta(m, k);
      if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw ValidationError("beta must be strictly positive and finite");
      }
      set.set(k, m, beta * CMat::Identity(n_ap, n_ap));
    }
  }
  return set;
}

CorrelationSet build_correlations(const LargeScaleMap& ls, int n_ap,
                                  const CMat& normalized_template) {
  validate_template(normalized_template, n_ap);
  const int m_aps = ls.num_aps();
  const int k_users = ls.num_users();
  CorrelationSet set(m_aps, k_users, n_ap);
  for (int m = 0; m < m_aps; ++m) {
    for (int k = 0; k < k_users; ++k) {
      const double beta = ls.beta(m, k);
      if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw ValidationError("beta must be strictly positive and finite");
      }
      set.set(k, m, beta * normalized_template);
    }
  }
  return set;
}

ChannelRealization draw_channels(const CorrelationSet& corr, Rng& rng) {
  ChannelRealization ch;
  ch.m_aps = corr.num_aps();
  ch.k_users = corr.num_users();
  ch.g.resize(ch.m_aps * ch.k_users);
  const int n_ap = corr.n_ap();
  CVec w(n_ap);
  for (int m = 0; m < ch.m_aps; ++m) {
    for (int k = 0; k < ch.k_users; ++k) {
      for (int i = 0; i < n_ap; ++i) w(i) = rng.cnormal(1.0);
      ch.of(k, m) = corr.sqrt_factor(k, m) * w;
    }
  }
  return ch;
}

}  // namespace cfsim
