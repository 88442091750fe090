#include "cfsim/pilots.hpp"

#include <cmath>

namespace cfsim {

CVec PilotBook::sequence(int idx) const {
  CVec phi = CVec::Zero(tau_p);
  phi(idx) = 1.0;
  return phi;
}

std::vector<int> assign_pilots(int k_users, int tau_p, PilotPolicy policy,
                               Rng* rng) {
  if (tau_p < 1) throw ConfigError("tau_p must be >= 1");
  std::vector<int> assignment(k_users);
  switch (policy) {
    case PilotPolicy::kRoundRobin:
      for (int k = 0; k < k_users; ++k) assignment[k] = k % tau_p;
      break;
    case PilotPolicy::kRandom:
      if (rng == nullptr) throw ConfigError("random pilot policy needs an rng");
      for (int k = 0; k < k_users; ++k) {
        assignment[k] = static_cast<int>(rng->below(tau_p));
      }
      break;
  }
  return assignment;
}

PilotBook make_pilot_book(int k_users, int tau_p, PilotPolicy policy,
                          Rng* rng) {
  PilotBook book;
  book.tau_p = tau_p;
  book.assignment = assign_pilots(k_users, tau_p, policy, rng);
  return book;
}

PerLink<CVec> training_observable(const ChannelRealization& channels,
                                  const PilotBook& pilots,
                                  const TrainingPowers& powers,
                                  double sigma2_w, Rng& rng) {
  const int m_aps = channels.m_aps;
  const int k_users = channels.k_users;
  const int n_ap = m_aps > 0 ? static_cast<int>(channels.of(0, 0).size()) : 0;

  PerLink<CVec> y(m_aps, k_users);
  std::vector<CVec> pilot_noise(pilots.tau_p);
  std::vector<CVec> pilot_signal(pilots.tau_p);
  for (int m = 0; m < m_aps; ++m) {
    // One noise projection per orthonormal sequence; users sharing a pilot
    // share it.
    for (int t = 0; t < pilots.tau_p; ++t) {
      CVec w(n_ap);
      for (int i = 0; i < n_ap; ++i) w(i) = rng.cnormal(sigma2_w);
      pilot_noise[t] = std::move(w);
      pilot_signal[t] = CVec::Zero(n_ap);
    }
    for (int i = 0; i < k_users; ++i) {
      pilot_signal[pilots.assignment[i]] +=
          std::sqrt(powers.p(i)) * channels.of(i, m);
    }
    for (int k = 0; k < k_users; ++k) {
      const int t = pilots.assignment[k];
      y.of(k, m) = pilot_signal[t] + pilot_noise[t];
    }
  }
  return y;
}

CMat gamma_matrix(int k, int m, const CorrelationSet& corr,
                  const PilotBook& pilots, const TrainingPowers& powers,
                  double sigma2_w) {
  const int n_ap = corr.n_ap();
  CMat gamma = sigma2_w * CMat::Identity(n_ap, n_ap);
  for (int i = 0; i < corr.num_users(); ++i) {
    const double rho = pilots.inner(i, k);
    if (rho != 0.0) gamma += powers.p(i) * rho * rho * corr.r(i, m);
  }
  return gamma;
}

namespace {

// Hermitian solve of Gamma X = B. Singular Gamma (possible only without the
// noise floor) raises NumericError; condition numbers beyond 1e12 fall back
// to a ridge-regularized factorization with a warning.
CMat solve_gamma(const CMat& gamma, const CMat& rhs, int k, int m) {
  Eigen::SelfAdjointEigenSolver<CMat> es(gamma);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmax > 0.0) || lmin <= 0.0) {
    throw NumericError("singular Gamma matrix for user " + std::to_string(k) +
                       ", AP " + std::to_string(m) +
                       " (sigma2_w = 0 with degenerate correlations?)");
  }
  CMat g = gamma;
  if (lmax / lmin > 1e12) {
    log_warn("Gamma for user " + std::to_string(k) + ", AP " +
             std::to_string(m) + " has condition number " +
             std::to_string(lmax / lmin) + "; regularizing");
    g += (lmax * 1e-12) * CMat::Identity(gamma.rows(), gamma.cols());
  }
  return Eigen::LDLT<CMat>(g).solve(rhs);
}

}  // namespace

CMat mmse_projection(int k, int m, const CorrelationSet& corr,
                     const TrainingPowers& powers, const CMat& gamma) {
  const CMat& r = corr.r(k, m);
  return std::sqrt(powers.p(k)) * solve_gamma(gamma, r, k, m).adjoint();
}

CVec mmse_estimate(const CVec& y_hat, int k, int m, const CorrelationSet& corr,
                   const TrainingPowers& powers, const CMat& gamma) {
  return mmse_projection(k, m, corr, powers, gamma) * y_hat;
}

CMat error_covariance(int k, int m, const CorrelationSet& corr,
                      const TrainingPowers& powers, const CMat& gamma) {
  const CMat& r = corr.r(k, m);
  CMat c = r - powers.p(k) * r * solve_gamma(gamma, r, k, m);
  return 0.5 * (c + c.adjoint());  // strip factorization roundoff
}

EstimateSet mmse_estimate_all(const PerLink<CVec>& y_hat,
                              const CorrelationSet& corr,
                              const PilotBook& pilots,
                              const TrainingPowers& powers, double sigma2_w) {
  const int m_aps = corr.num_aps();
  const int k_users = corr.num_users();
  EstimateSet est;
  est.g_hat = PerLink<CVec>(m_aps, k_users);
  est.gamma = PerLink<CMat>(m_aps, k_users);
  est.c = PerLink<CMat>(m_aps, k_users);
  for (int m = 0; m < m_aps; ++m) {
    for (int k = 0; k < k_users; ++k) {
      CMat gamma = gamma_matrix(k, m, corr, pilots, powers, sigma2_w);
      est.g_hat.of(k, m) =
          mmse_estimate(y_hat.of(k, m), k, m, corr, powers, gamma);
      est.c.of(k, m) = error_covariance(k, m, corr, powers, gamma);
      est.gamma.of(k, m) = std::move(gamma);
    }
  }
  return est;
}

}  // namespace cfsim
