#include "cfsim/association.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cfsim {

bool AssociationMap::serves(int m, int k) const {
  const auto& s = served[m];
  return std::find(s.begin(), s.end(), k) != s.end();
}

AssociationMap associate(const Mat& beta, int n_m) {
  const int m_aps = static_cast<int>(beta.rows());
  const int k_users = static_cast<int>(beta.cols());
  if (n_m < 1 || n_m > k_users) {
    throw ConfigError("association needs 1 <= N <= K");
  }

  AssociationMap map;
  map.served.resize(m_aps);
  map.serving.resize(k_users);

  std::vector<int> order(k_users);
  for (int m = 0; m < m_aps; ++m) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return beta(m, a) > beta(m, b);  // stable: equal beta keeps lower index
    });
    map.served[m].assign(order.begin(), order.begin() + n_m);
    for (int k : map.served[m]) map.serving[k].push_back(m);
  }
  for (int k = 0; k < k_users; ++k) {
    if (map.serving[k].empty()) {
      log_warn("user " + std::to_string(k) +
               " is served by no AP (outage); frames count as errors");
    }
  }
  return map;
}

double fpc_power(int k, const Mat& beta, const std::vector<int>& serving,
                 const FpcParams& params) {
  if (params.kappa < 0.0) throw ConfigError("FPC kappa must be >= 0");
  if (serving.empty()) {
    log_warn("FPC power undefined for unserved user " + std::to_string(k) +
             "; using P_max");
    return params.p_max_w;
  }
  double sum_beta = 0.0;
  for (int m : serving) sum_beta += beta(m, k);
  const double zeta = std::sqrt(sum_beta);
  return std::min(params.p_max_w, params.p0_w * std::pow(zeta, -params.kappa));
}

UplinkPowers fpc_powers(const Mat& beta, const AssociationMap& assoc,
                        const FpcParams& params) {
  const int k_users = static_cast<int>(beta.cols());
  UplinkPowers powers;
  powers.params = params;
  powers.eta_w = Vec(k_users);
  for (int k = 0; k < k_users; ++k) {
    powers.eta_w(k) = fpc_power(k, beta, assoc.serving[k], params);
  }
  return powers;
}

}  // namespace cfsim
