#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "cfsim/common.hpp"

namespace cfsim {

// Soft outputs are clamped to +-kLlrClamp to keep decoder metrics finite.
inline constexpr double kLlrClamp = 100.0;

inline double clamp_llr(double l) {
  return l > kLlrClamp ? kLlrClamp : (l < -kLlrClamp ? -kLlrClamp : l);
}

// Per-real-dimension bit labeling. QPSK carries q = 1 bit per real dimension
// with amplitudes +-1/sqrt(2); bit 0 maps to +1/sqrt(2) so that
// (b_I, b_Q) = (0, 0) transmits (1 + j)/sqrt(2).
struct BitMapping {
  int bits_per_real_dim = 1;
  std::vector<double> amplitudes;  // indexed by bit value

  double amplitude(int bit) const { return amplitudes[bit]; }
  int slice_bit(double v) const;
  // E[x^2] per real dimension over equiprobable bits (1/2 for QPSK).
  double energy_per_real_dim() const;

  static BitMapping qpsk();
};

struct DetectorOutput {
  Vec llrs;  // log P(b=1)/P(b=0) per real-model column, clamped
  std::uint64_t op_count = 0;  // enumerated hypotheses / completions
};

// Common interface for the per-AP detectors the harness runs once per symbol
// on a model that is fixed for the whole frame.
class LocalDetector {
 public:
  virtual ~LocalDetector() = default;
  virtual DetectorOutput run(const Vec& y) const = 0;
};

// Greedy ZF nulling-and-cancellation chain over a fixed detection order;
// shared by the ZF-DF detector and the PM completion step.
class ZfDfChain {
 public:
  ZfDfChain() = default;
  ZfDfChain(const Mat& b, std::vector<int> detection_order);

  // Nulling, slicing and cancellation in order. `residual` enters as the
  // (conditioned) observation and leaves as y - B x for the completed x.
  // Sliced bits land in bits_by_col[column]; optional z taps per column.
  void run(const Mat& b, const BitMapping& map, Vec& residual,
           std::vector<int>& bits_by_col,
           std::vector<double>* z_by_col = nullptr) const;

  const std::vector<int>& order() const { return order_; }
  double filter_norm2(int stage) const { return w_norm2_[stage]; }

 private:
  std::vector<int> order_;
  std::vector<Vec> w_;  // per-stage ZF filter for the detected column
  std::vector<double> w_norm2_;
};

// V-BLAST ordering: detect the column with the best post-equalization SNR
// (smallest pseudo-inverse row norm) first. Rank-deficient matrices fall back
// to a ridge-regularized pseudo-inverse (epsilon = 1e-10 * trace) with a
// warning. sigma2_e does not affect the ZF ordering; kept for signature
// symmetry with the detectors.
std::vector<int> vblast_order(const Mat& b_hat, double sigma2_e);

// Hard ZF-DF detection in the given order; returns one bit per column.
std::vector<int> zf_df_detect(const Vec& y, const Mat& b_hat, double sigma2_e,
                              const BitMapping& map,
                              const std::vector<int>& order);

// Exact per-bit LLRs via full enumeration of all 2^(2 N_m q) hypotheses with
// max-shifted log-sum-exp. Construction throws CapacityError when the bit
// count exceeds cap_bits (default 24); use PM beyond that.
class ExactMlDetector : public LocalDetector {
 public:
  ExactMlDetector(Mat b_hat, double sigma2_e, BitMapping map,
                  int cap_bits = 24);
  DetectorOutput run(const Vec& y) const override;
  int num_bits() const { return n_bits_; }

 private:
  Mat b_;
  double sigma2_e_;
  BitMapping map_;
  int n_bits_;
  bool use_table_;
  Mat bx_;         // B x_h per hypothesis (table path)
  Vec bx_norm2_;   // ||B x_h||^2 per hypothesis
};

// Partial marginalization: for each target bit, the bit itself plus the
// r - 1 least reliable other bits (V-BLAST reliability) are enumerated
// exactly; the rest are completed by hard ZF-DF; per-assignment Gaussian
// metrics are combined by log-sum-exp. r = 2 N_m q reproduces exact ML;
// r <= 1 degenerates to per-bit max-log with ZF-DF completion (the target
// bit is always enumerated).
class PmDetector : public LocalDetector {
 public:
  PmDetector(Mat b_hat, double sigma2_e, BitMapping map, int r);
  DetectorOutput run(const Vec& y) const override;
  int effective_r() const { return r_eff_; }

 private:
  struct Partition {
    std::vector<int> fixed;  // enumerated columns; fixed[0] is the target
    ZfDfChain chain;         // completion over the remaining columns
  };
  Mat b_;
  double sigma2_e_;
  BitMapping map_;
  int r_eff_;
  std::vector<Partition> partitions_;  // one per bit
};

// ZF-DF with V-BLAST ordering and per-stage Gaussian-approximation LLRs
// (z = x + w^T e after nulling; noise variance ||w||^2 sigma2_e / 2).
class ZfDfSoftDetector : public LocalDetector {
 public:
  ZfDfSoftDetector(Mat b_hat, double sigma2_e, BitMapping map);
  DetectorOutput run(const Vec& y) const override;

 private:
  Mat b_;
  double sigma2_e_;
  BitMapping map_;
  ZfDfChain chain_;
};

// MMSE-SIC: per stage w = (B B^T + sigma2_e/2 I)^-1 b_j on the deflated
// model, effective gain mu = w^T b_j, effective noise nu^2 = w^T A w - mu^2;
// scalar Gaussian LLR from the filtered output, hard re-slice, cancel.
class MmseSicDetector : public LocalDetector {
 public:
  MmseSicDetector(Mat b_hat, double sigma2_e, BitMapping map);
  DetectorOutput run(const Vec& y) const override;

 private:
  struct Stage {
    int col;
    Vec w;
    double mu;
    double nu2;
  };
  Mat b_;
  BitMapping map_;
  std::vector<Stage> stages_;
};

// Per-column matched filter z_j = b_j^T y / ||b_j||^2 with residual
// interference treated as Gaussian: var = sigma2_e/2/||b_j||^2
// + sum_{l != j} (b_j^T b_l)^2 E[x^2] / ||b_j||^4.
class MrcDetector : public LocalDetector {
 public:
  MrcDetector(Mat b_hat, double sigma2_e, BitMapping map);
  DetectorOutput run(const Vec& y) const override;

 private:
  Mat b_;
  BitMapping map_;
  std::vector<double> inv_norm2_;
  std::vector<double> var_;
};

// One serving AP's contribution to a centralized stack: its complex model
// columns follow `users` (the AP's served set).
struct ApBlock {
  CMat b_hat;  // N_AP x N_m complex effective model
  std::vector<int> users;
  double sigma2_e;
};

// Centralized PM: rows from every serving AP are stacked over the union user
// set (columns for users an AP does not serve are zero), each block row-scaled
// by 1 / sqrt(sigma2_{e,m}/2) so the stacked metric has unit per-dimension
// variance.
class CentralizedPmDetector {
 public:
  CentralizedPmDetector(const std::vector<ApBlock>& blocks,
                        const BitMapping& map, int r);

  // y_per_ap follows the block order used at construction.
  DetectorOutput run(const std::vector<CVec>& y_per_ap) const;

  const std::vector<int>& union_users() const { return union_users_; }
  // LLR indices for a user's (I, Q) bits within the stacked output.
  std::pair<int, int> bit_indices(int user) const;

 private:
  std::vector<int> union_users_;
  std::vector<double> row_scale_;
  int n_ap_rows_ = 0;
  std::unique_ptr<PmDetector> pm_;
};

// One-shot forms of the detector operations.
DetectorOutput exact_ml_llrs(const Vec& y, const Mat& b_hat, double sigma2_e,
                             const BitMapping& map, int cap_bits = 24);
DetectorOutput pm_llrs(const Vec& y, const Mat& b_hat, double sigma2_e,
                       const BitMapping& map, int r);
DetectorOutput mmse_sic_llrs(const Vec& y, const Mat& b_hat, double sigma2_e,
                             const BitMapping& map);
DetectorOutput mrc_llrs(const Vec& y, const Mat& b_hat, double sigma2_e,
                        const BitMapping& map);
DetectorOutput centralized_pm_llrs(const std::vector<ApBlock>& blocks,
                                   const std::vector<CVec>& y_per_ap,
                                   const BitMapping& map, int r);

}  // namespace cfsim
