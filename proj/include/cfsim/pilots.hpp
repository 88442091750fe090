#pragma once

#include <vector>

#include "cfsim/common.hpp"
#include "cfsim/geometry.hpp"
#include "cfsim/rng.hpp"

namespace cfsim {

enum class PilotPolicy { kRoundRobin, kRandom };

// tau_p orthonormal sequences realized as columns of the identity; only the
// inner products |phi_i^H phi_k| in {0,1} enter the training model.
struct PilotBook {
  int tau_p = 0;
  std::vector<int> assignment;  // user -> sequence index

  double inner(int i, int k) const {
    return assignment[i] == assignment[k] ? 1.0 : 0.0;
  }
  CVec sequence(int idx) const;
};

std::vector<int> assign_pilots(int k_users, int tau_p, PilotPolicy policy,
                               Rng* rng = nullptr);

PilotBook make_pilot_book(int k_users, int tau_p, PilotPolicy policy,
                          Rng* rng = nullptr);

// Training energies p_k = tau_p * p_tilde_k.
struct TrainingPowers {
  int tau_p = 0;
  Vec p_tilde_w;  // per-sample training power, watts

  double p(int k) const { return tau_p * p_tilde_w(k); }
};

// Projection of the received training signal on each user's pilot:
//   yhat_{k,m} = sqrt(p_k) g_{k,m} + sum_{i != k} sqrt(p_i) g_{i,m} phi_i^H phi_k
//                + w_{k,m},   w ~ CN(0, sigma2_w I).
// Users sharing a pilot see the same noise projection; projections on
// orthogonal pilots are independent.
PerLink<CVec> training_observable(const ChannelRealization& channels,
                                  const PilotBook& pilots,
                                  const TrainingPowers& powers,
                                  double sigma2_w, Rng& rng);

// Gamma_{k,m} = sum_i p_i R_{i,m} |phi_i^H phi_k|^2 + sigma2_w I.
CMat gamma_matrix(int k, int m, const CorrelationSet& corr,
                  const PilotBook& pilots, const TrainingPowers& powers,
                  double sigma2_w);

// Linear MMSE map: ghat = sqrt(p_k) R Gamma^{-1} yhat.
CMat mmse_projection(int k, int m, const CorrelationSet& corr,
                     const TrainingPowers& powers, const CMat& gamma);

CVec mmse_estimate(const CVec& y_hat, int k, int m, const CorrelationSet& corr,
                   const TrainingPowers& powers, const CMat& gamma);

// C_{k,m} = R_{k,m} - p_k R_{k,m} Gamma^{-1} R_{k,m}.
CMat error_covariance(int k, int m, const CorrelationSet& corr,
                      const TrainingPowers& powers, const CMat& gamma);

struct EstimateSet {
  PerLink<CVec> g_hat;
  PerLink<CMat> gamma;
  PerLink<CMat> c;
};

EstimateSet mmse_estimate_all(const PerLink<CVec>& y_hat,
                              const CorrelationSet& corr,
                              const PilotBook& pilots,
                              const TrainingPowers& powers, double sigma2_w);

}  // namespace cfsim
