#pragma once

#include <vector>

#include "cfsim/association.hpp"
#include "cfsim/common.hpp"
#include "cfsim/geometry.hpp"
#include "cfsim/pilots.hpp"
#include "cfsim/rng.hpp"

namespace cfsim {

// One symbol interval of the uplink: the per-AP received vectors and the
// symbols every user transmitted.
struct ComplexObservation {
  std::vector<CVec> y_bar;  // per AP
  CVec symbols;             // per user
};

// y_bar_m = sum_k sqrt(eta_k) g_{k,m} x_k + w_bar_m, w ~ CN(0, sigma2_w I).
ComplexObservation synth_uplink(const ChannelRealization& channels,
                                const UplinkPowers& powers, const CVec& symbols,
                                double sigma2_w, Rng& rng);

// Standard block realification: v -> [Re v; Im v],
// A -> [[Re A, -Im A], [Im A, Re A]], so realify(A x) = realify(A) realify(x).
Vec realify_vector(const CVec& v);
Mat realify_matrix(const CMat& a);

// sigma2_{e,m} = sum_{j in K_m} eta_j tr(C_{j,m})/N_AP
//              + sum_{j not in K_m} eta_j tr(R_{j,m})/N_AP + sigma2_w.
// Each real dimension of the effective noise carries sigma2_{e,m}/2.
double interference_variance(int m, const AssociationMap& assoc,
                             const UplinkPowers& powers,
                             const PerLink<CMat>& c_mats,
                             const CorrelationSet& r_mats, double sigma2_w);

// Per-AP real-valued detection model for the served set K_m: column j of the
// complex matrix is sqrt(eta_{K_m(j)}) ghat_{K_m(j),m}.
struct EffectiveModel {
  Mat b_hat_real;   // 2 N_AP x 2 N_m
  double sigma2_e;  // total (complex) interference-plus-noise variance
  std::vector<int> users;  // K_m order backing the column layout
};

EffectiveModel effective_model(int m, const EstimateSet& estimates,
                               const AssociationMap& assoc,
                               const UplinkPowers& powers, double sigma2_e);

CMat effective_model_complex(int m, const EstimateSet& estimates,
                             const AssociationMap& assoc,
                             const UplinkPowers& powers);

}  // namespace cfsim
