#pragma once

#include <vector>

#include "cfsim/common.hpp"

namespace cfsim {

// AP-centric association: served[m] lists the N_m users an AP decodes,
// ordered by descending beta (ties to the lower user index); serving[k] is
// the inverse map.
struct AssociationMap {
  std::vector<std::vector<int>> served;   // per AP, ordered user indices
  std::vector<std::vector<int>> serving;  // per user, ascending AP indices

  bool serves(int m, int k) const;
  bool in_outage(int k) const { return serving[k].empty(); }
};

// n_m users per AP, uniform across APs. Users left unserved everywhere are
// logged as being in outage (their frames count as errors downstream).
AssociationMap associate(const Mat& beta, int n_m);

struct FpcParams {
  double p_max_w = 0.1;
  double p0_w = 1e-4;  // -10 dBmW
  double kappa = 0.5;
};

// eta_k = min(P_max, P0 * zeta_k^-kappa), zeta_k = sqrt(sum_{m in M_k} beta).
// An empty serving set yields P_max and a warning (power is undefined there).
double fpc_power(int k, const Mat& beta, const std::vector<int>& serving,
                 const FpcParams& params);

struct UplinkPowers {
  Vec eta_w;  // per-user uplink transmit power, watts
  FpcParams params;
};

UplinkPowers fpc_powers(const Mat& beta, const AssociationMap& assoc,
                        const FpcParams& params);

}  // namespace cfsim
