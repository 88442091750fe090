#include "cfsim/uplink.hpp"

#include <cmath>

namespace cfsim {

ComplexObservation synth_uplink(const ChannelRealization& channels,
                                const UplinkPowers& powers, const CVec& symbols,
                                double sigma2_w, Rng& rng) {
  const int m_aps = channels.m_aps;
  const int k_users = channels.k_users;
  const int n_ap = m_aps > 0 ? static_cast<int>(channels.of(0, 0).size()) : 0;

  ComplexObservation obs;
  obs.symbols = symbols;
  obs.y_bar.resize(m_aps);
  for (int m = 0; m < m_aps; ++m) {
    CVec y(n_ap);
    for (int i = 0; i < n_ap; ++i) y(i) = rng.cnormal(sigma2_w);
    for (int k = 0; k < k_users; ++k) {
      y += std::sqrt(powers.eta_w(k)) * symbols(k) * channels.of(k, m);
    }
    obs.y_bar[m] = std::move(y);
  }
  return obs;
}

Vec realify_vector(const CVec& v) {
  const auto n = v.size();
  Vec out(2 * n);
  out.head(n) = v.real();
  out.tail(n) = v.imag();
  return out;
}

Mat realify_matrix(const CMat& a) {
  const auto n = a.rows();
  const auto m = a.cols();
  Mat out(2 * n, 2 * m);
  out.topLeftCorner(n, m) = a.real();
  out.topRightCorner(n, m) = -a.imag();
  out.bottomLeftCorner(n, m) = a.imag();
  out.bottomRightCorner(n, m) = a.real();
  return out;
}

double interference_variance(int m, const AssociationMap& assoc,
                             const UplinkPowers& powers,
                             const PerLink<CMat>& c_mats,
                             const CorrelationSet& r_mats, double sigma2_w) {
  const int k_users = r_mats.num_users();
  const int n_ap = r_mats.n_ap();
  double var = sigma2_w;
  for (int j = 0; j < k_users; ++j) {
    const bool served = assoc.serves(m, j);
    const CMat& cov = served ? c_mats.of(j, m) : r_mats.r(j, m);
    var += powers.eta_w(j) * cov.trace().real() / n_ap;
  }
  return var;
}

CMat effective_model_complex(int m, const EstimateSet& estimates,
                             const AssociationMap& assoc,
                             const UplinkPowers& powers) {
  const auto& users = assoc.served[m];
  if (users.empty()) throw PipelineError("AP serves no users");
  const auto n_ap = estimates.g_hat.of(users[0], m).size();
  CMat b_hat(n_ap, users.size());
  for (std::size_t j = 0; j < users.size(); ++j) {
    const CVec& g_hat = estimates.g_hat.of(users[j], m);
    if (g_hat.size() != n_ap) {
      throw PipelineError("missing channel estimate for served user");
    }
    b_hat.col(j) = std::sqrt(powers.eta_w(users[j])) * g_hat;
  }
  return b_hat;
}

EffectiveModel effective_model(int m, const EstimateSet& estimates,
                               const AssociationMap& assoc,
                               const UplinkPowers& powers, double sigma2_e) {
  EffectiveModel model;
  model.users = assoc.served[m];
  model.b_hat_real =
      realify_matrix(effective_model_complex(m, estimates, assoc, powers));
  model.sigma2_e = sigma2_e;
  return model;
}

}  // namespace cfsim
