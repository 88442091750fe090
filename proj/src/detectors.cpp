#include "cfsim/detectors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "cfsim/uplink.hpp"

namespace cfsim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Streaming max-shifted log-sum-exp.
struct LogSumExp {
  double mx = kNegInf;
  double sum = 0.0;

  void add(double s) {
    if (s <= mx) {
      sum += std::exp(s - mx);
    } else {
      sum = sum * std::exp(mx - s) + 1.0;
      mx = s;
    }
  }
  double value() const { return mx == kNegInf ? kNegInf : mx + std::log(sum); }
};

// Gram matrix of the given columns, ridge-regularized when rank-deficient
// (epsilon = 1e-10 * trace).
Mat safe_gram(const Mat& sub, bool* ridged) {
  Mat g = sub.transpose() * sub;
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmax > 0.0) || lmin <= 1e-12 * lmax) {
    g.diagonal().array() += 1e-10 * std::max(g.trace(), 1e-290);
    *ridged = true;
  }
  return g;
}

Mat gather_columns(const Mat& b, const std::vector<int>& cols, int from) {
  Mat sub(b.rows(), cols.size() - from);
  for (std::size_t i = from; i < cols.size(); ++i) {
    sub.col(i - from) = b.col(cols[i]);
  }
  return sub;
}

void check_mapping(const BitMapping& map) {
  if (map.bits_per_real_dim != 1 || map.amplitudes.size() != 2) {
    throw ConfigError("detectors support q = 1 (two amplitudes per real dim)");
  }
}

// z ~ N(gain * a(b), var): log P(b=1)/P(b=0).
double gaussian_bit_llr(double z, double gain, double var,
                        const BitMapping& map) {
  const double a0 = gain * map.amplitude(0);
  const double a1 = gain * map.amplitude(1);
  return clamp_llr(((z - a0) * (z - a0) - (z - a1) * (z - a1)) / (2.0 * var));
}

}  // namespace

int BitMapping::slice_bit(double v) const {
  return std::abs(v - amplitudes[0]) <= std::abs(v - amplitudes[1]) ? 0 : 1;
}

double BitMapping::energy_per_real_dim() const {
  double e = 0.0;
  for (double a : amplitudes) e += a * a;
  return e / static_cast<double>(amplitudes.size());
}

BitMapping BitMapping::qpsk() {
  BitMapping map;
  map.bits_per_real_dim = 1;
  map.amplitudes = {M_SQRT1_2, -M_SQRT1_2};
  return map;
}

std::vector<int> vblast_order(const Mat& b_hat, double /*sigma2_e*/) {
  const int n = static_cast<int>(b_hat.cols());
  std::vector<int> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<int> order;
  order.reserve(n);
  bool warned = false;
  while (!remaining.empty()) {
    Mat sub = gather_columns(b_hat, remaining, 0);
    bool ridged = false;
    Mat g = safe_gram(sub, &ridged);
    if (ridged && !warned) {
      log_warn("vblast_order: rank-deficient model, using ridge-regularized "
               "pseudo-inverse");
      warned = true;
    }
    // Post-equalization SNR of column i is 1 / (G^-1)_{ii}; detect the best.
    Mat ginv = g.ldlt().solve(Mat::Identity(g.rows(), g.cols()));
    int best = 0;
    for (int i = 1; i < static_cast<int>(remaining.size()); ++i) {
      if (ginv(i, i) < ginv(best, best)) best = i;
    }
    order.push_back(remaining[best]);
    remaining.erase(remaining.begin() + best);
  }
  return order;
}

ZfDfChain::ZfDfChain(const Mat& b, std::vector<int> detection_order)
    : order_(std::move(detection_order)) {
  const int stages = static_cast<int>(order_.size());
  w_.resize(stages);
  w_norm2_.resize(stages);
  bool warned = false;
  for (int s = 0; s < stages; ++s) {
    Mat sub = gather_columns(b, order_, s);
    bool ridged = false;
    Mat g = safe_gram(sub, &ridged);
    if (ridged && !warned) {
      log_warn("zf_df: rank-deficient model, using ridge-regularized "
               "pseudo-inverse");
      warned = true;
    }
    Vec e0 = Vec::Zero(sub.cols());
    e0(0) = 1.0;
    w_[s] = sub * g.ldlt().solve(e0);
    w_norm2_[s] = w_[s].squaredNorm();
  }
}

void ZfDfChain::run(const Mat& b, const BitMapping& map, Vec& residual,
                    std::vector<int>& bits_by_col,
                    std::vector<double>* z_by_col) const {
  for (std::size_t s = 0; s < order_.size(); ++s) {
    const int col = order_[s];
    const double z = w_[s].dot(residual);
    const int bit = map.slice_bit(z);
    bits_by_col[col] = bit;
    if (z_by_col != nullptr) (*z_by_col)[col] = z;
    residual -= map.amplitude(bit) * b.col(col);
  }
}

std::vector<int> zf_df_detect(const Vec& y, const Mat& b_hat, double sigma2_e,
                              const BitMapping& map,
                              const std::vector<int>& order) {
  check_mapping(map);
  (void)sigma2_e;
  if (order.size() != static_cast<std::size_t>(b_hat.cols())) {
    throw PipelineError("zf_df_detect: order must cover every column");
  }
  ZfDfChain chain(b_hat, order);
  Vec residual = y;
  std::vector<int> bits(b_hat.cols(), 0);
  chain.run(b_hat, map, residual, bits);
  return bits;
}

ExactMlDetector::ExactMlDetector(Mat b_hat, double sigma2_e, BitMapping map,
                                 int cap_bits)
    : b_(std::move(b_hat)), sigma2_e_(sigma2_e), map_(std::move(map)) {
  check_mapping(map_);
  n_bits_ = static_cast<int>(b_.cols()) * map_.bits_per_real_dim;
  if (n_bits_ > cap_bits) {
    throw CapacityError("exact ML would enumerate 2^" +
                        std::to_string(n_bits_) + " hypotheses (cap 2^" +
                        std::to_string(cap_bits) +
                        "); use the PM detector instead");
  }
  use_table_ = n_bits_ <= 18;
  if (use_table_) {
    const std::size_t count = std::size_t{1} << n_bits_;
    bx_.resize(b_.rows(), count);
    bx_norm2_.resize(count);
    Vec x(b_.cols());
    for (std::size_t h = 0; h < count; ++h) {
      for (int i = 0; i < n_bits_; ++i) {
        x(i) = map_.amplitude(static_cast<int>((h >> i) & 1u));
      }
      bx_.col(h) = b_ * x;
      bx_norm2_(h) = bx_.col(h).squaredNorm();
    }
  }
}

DetectorOutput ExactMlDetector::run(const Vec& y) const {
  const std::size_t count = std::size_t{1} << n_bits_;
  DetectorOutput out;
  out.llrs = Vec(n_bits_);
  out.op_count = count;

  std::vector<double> sum1(n_bits_, 0.0);
  std::vector<double> sum0(n_bits_, 0.0);

  if (use_table_) {
    const double yn = y.squaredNorm();
    Vec yb = bx_.transpose() * y;
    double smax = kNegInf;
    for (std::size_t h = 0; h < count; ++h) {
      const double s = -(yn - 2.0 * yb(h) + bx_norm2_(h)) / sigma2_e_;
      if (s > smax) smax = s;
      yb(h) = s;  // reuse as score storage
    }
    for (std::size_t h = 0; h < count; ++h) {
      const double e = std::exp(yb(h) - smax);
      for (int i = 0; i < n_bits_; ++i) {
        ((h >> i) & 1u) != 0 ? sum1[i] += e : sum0[i] += e;
      }
    }
  } else {
    // Gray-code walk, two passes (max then accumulate), no hypothesis table.
    auto for_each_score = [&](auto&& fn) {
      Vec v = Vec::Zero(b_.rows());
      for (int i = 0; i < n_bits_; ++i) v += map_.amplitude(0) * b_.col(i);
      std::size_t pattern = 0;
      for (std::size_t g = 0;;) {
        fn(pattern, -(y - v).squaredNorm() / sigma2_e_);
        if (++g == count) break;
        const int flip = std::countr_zero(g);
        pattern ^= std::size_t{1} << flip;
        const int bit = static_cast<int>((pattern >> flip) & 1u);
        v += (map_.amplitude(bit) - map_.amplitude(1 - bit)) * b_.col(flip);
      }
    };
    double smax = kNegInf;
    for_each_score([&](std::size_t, double s) {
      if (s > smax) smax = s;
    });
    for_each_score([&](std::size_t pattern, double s) {
      const double e = std::exp(s - smax);
      for (int i = 0; i < n_bits_; ++i) {
        ((pattern >> i) & 1u) != 0 ? sum1[i] += e : sum0[i] += e;
      }
    });
  }

  for (int i = 0; i < n_bits_; ++i) {
    out.llrs(i) = clamp_llr(std::log(sum1[i]) - std::log(sum0[i]));
  }
  return out;
}

PmDetector::PmDetector(Mat b_hat, double sigma2_e, BitMapping map, int r)
    : b_(std::move(b_hat)), sigma2_e_(sigma2_e), map_(std::move(map)) {
  check_mapping(map_);
  const int n = static_cast<int>(b_.cols()) * map_.bits_per_real_dim;
  if (r < 0 || r > n) {
    throw ConfigError("pm parameter r must satisfy 0 <= r <= 2 N_m q");
  }
  r_eff_ = std::clamp(r, 1, n);

  // Reliability ranking shared by all partitions; least reliable bits are
  // the ones enumerated exactly alongside the target.
  const std::vector<int> rel = vblast_order(b_, sigma2_e_);
  partitions_.resize(n);
  for (int i = 0; i < n; ++i) {
    Partition& part = partitions_[i];
    part.fixed.reserve(r_eff_);
    part.fixed.push_back(i);
    for (int t = n - 1; t >= 0 && static_cast<int>(part.fixed.size()) < r_eff_;
         --t) {
      if (rel[t] != i) part.fixed.push_back(rel[t]);
    }
    std::vector<int> free;
    free.reserve(n - r_eff_);
    for (int c : rel) {
      if (std::find(part.fixed.begin(), part.fixed.end(), c) ==
          part.fixed.end()) {
        free.push_back(c);
      }
    }
    part.chain = ZfDfChain(b_, std::move(free));
  }
}

DetectorOutput PmDetector::run(const Vec& y) const {
  const int n = static_cast<int>(partitions_.size());
  DetectorOutput out;
  out.llrs = Vec(n);

  std::vector<int> bits(b_.cols(), 0);
  Vec cond(y.size());
  Vec residual(y.size());
  for (int i = 0; i < n; ++i) {
    const Partition& part = partitions_[i];
    LogSumExp lse[2];
    const std::size_t count = std::size_t{1} << r_eff_;

    // Gray-code walk over assignments of the fixed set; bit j of `pattern`
    // is the value of column part.fixed[j], bit 0 being the target.
    std::size_t pattern = 0;
    cond = y;
    for (int j = 0; j < r_eff_; ++j) {
      cond -= map_.amplitude(0) * b_.col(part.fixed[j]);
    }
    for (std::size_t g = 0;;) {
      residual = cond;
      part.chain.run(b_, map_, residual, bits);
      lse[pattern & 1u].add(-residual.squaredNorm() / sigma2_e_);
      ++out.op_count;
      if (++g == count) break;
      const int flip = std::countr_zero(g);
      pattern ^= std::size_t{1} << flip;
      const int bit = static_cast<int>((pattern >> flip) & 1u);
      cond -= (map_.amplitude(bit) - map_.amplitude(1 - bit)) *
              b_.col(part.fixed[flip]);
    }
    out.llrs(i) = clamp_llr(lse[1].value() - lse[0].value());
  }
  return out;
}

ZfDfSoftDetector::ZfDfSoftDetector(Mat b_hat, double sigma2_e, BitMapping map)
    : b_(std::move(b_hat)), sigma2_e_(sigma2_e), map_(std::move(map)) {
  check_mapping(map_);
  chain_ = ZfDfChain(b_, vblast_order(b_, sigma2_e_));
}

DetectorOutput ZfDfSoftDetector::run(const Vec& y) const {
  const int n = static_cast<int>(b_.cols());
  DetectorOutput out;
  out.llrs = Vec(n);
  out.op_count = 1;

  Vec residual = y;
  std::vector<int> bits(n, 0);
  std::vector<double> z(n, 0.0);
  chain_.run(b_, map_, residual, bits, &z);
  for (std::size_t s = 0; s < chain_.order().size(); ++s) {
    const int col = chain_.order()[s];
    const double var =
        std::max(chain_.filter_norm2(s) * sigma2_e_ / 2.0, 1e-30);
    out.llrs(col) = gaussian_bit_llr(z[col], 1.0, var, map_);
  }
  return out;
}

MmseSicDetector::MmseSicDetector(Mat b_hat, double sigma2_e, BitMapping map)
    : b_(std::move(b_hat)), map_(std::move(map)) {
  check_mapping(map_);
  const int n = static_cast<int>(b_.cols());
  const int rows = static_cast<int>(b_.rows());
  const double noise_half = sigma2_e / 2.0;

  std::vector<int> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  stages_.reserve(n);
  while (!remaining.empty()) {
    Mat sub = gather_columns(b_, remaining, 0);
    Mat a = sub * sub.transpose();
    double diag = noise_half;
    if (!(diag > 0.0)) {
      diag = std::max(1e-12 * a.trace() / rows, 1e-300);
    }
    a.diagonal().array() += diag;
    Eigen::LDLT<Mat> ldlt(a);

    // Best post-filter SINR mu/(1-mu): take the largest mu, ties to the
    // lower column index.
    int best = -1;
    double best_mu = -1.0;
    Mat w_all = ldlt.solve(sub);
    for (int i = 0; i < static_cast<int>(remaining.size()); ++i) {
      const double mu = sub.col(i).dot(w_all.col(i));
      if (mu > best_mu) {
        best_mu = mu;
        best = i;
      }
    }
    Stage stage;
    stage.col = remaining[best];
    stage.w = w_all.col(best);
    stage.mu = best_mu;
    stage.nu2 = std::max(stage.w.dot(a.selfadjointView<Eigen::Lower>() *
                                     stage.w) -
                             best_mu * best_mu,
                         1e-30);
    stages_.push_back(std::move(stage));
    remaining.erase(remaining.begin() + best);
  }
}

DetectorOutput MmseSicDetector::run(const Vec& y) const {
  const int n = static_cast<int>(b_.cols());
  DetectorOutput out;
  out.llrs = Vec::Zero(n);
  out.op_count = 1;

  Vec residual = y;
  for (const Stage& stage : stages_) {
    const double z = stage.w.dot(residual);
    if (stage.mu <= 1e-300) continue;  // dead column, no information
    out.llrs(stage.col) = gaussian_bit_llr(z, stage.mu, stage.nu2, map_);
    const int bit = map_.slice_bit(z / stage.mu);
    residual -= map_.amplitude(bit) * b_.col(stage.col);
  }
  return out;
}

MrcDetector::MrcDetector(Mat b_hat, double sigma2_e, BitMapping map)
    : b_(std::move(b_hat)), map_(std::move(map)) {
  check_mapping(map_);
  const int n = static_cast<int>(b_.cols());
  inv_norm2_.resize(n);
  var_.resize(n);
  const double ex = map_.energy_per_real_dim();
  for (int j = 0; j < n; ++j) {
    const double norm2 = b_.col(j).squaredNorm();
    if (norm2 <= 0.0) {
      log_warn("mrc: zero-norm model column " + std::to_string(j) +
               "; emitting zero LLRs for it");
      inv_norm2_[j] = 0.0;
      var_[j] = 1.0;
      continue;
    }
    inv_norm2_[j] = 1.0 / norm2;
    double leakage = 0.0;
    for (int l = 0; l < n; ++l) {
      if (l == j) continue;
      const double cross = b_.col(j).dot(b_.col(l));
      leakage += cross * cross * ex;
    }
    var_[j] = std::max(
        sigma2_e / 2.0 / norm2 + leakage / (norm2 * norm2), 1e-30);
  }
}

DetectorOutput MrcDetector::run(const Vec& y) const {
  const int n = static_cast<int>(b_.cols());
  DetectorOutput out;
  out.llrs = Vec::Zero(n);
  out.op_count = 1;
  for (int j = 0; j < n; ++j) {
    if (inv_norm2_[j] == 0.0) continue;
    const double z = b_.col(j).dot(y) * inv_norm2_[j];
    out.llrs(j) = gaussian_bit_llr(z, 1.0, var_[j], map_);
  }
  return out;
}

CentralizedPmDetector::CentralizedPmDetector(const std::vector<ApBlock>& blocks,
                                             const BitMapping& map, int r) {
  if (blocks.empty()) {
    throw PipelineError("centralized stack needs at least one AP block");
  }
  std::set<int> u;
  for (const ApBlock& blk : blocks) u.insert(blk.users.begin(), blk.users.end());
  union_users_.assign(u.begin(), u.end());
  const int nu = static_cast<int>(union_users_.size());

  int rows = 0;
  for (const ApBlock& blk : blocks) rows += static_cast<int>(blk.b_hat.rows());
  n_ap_rows_ = rows;

  CMat stacked = CMat::Zero(rows, nu);
  int row0 = 0;
  for (const ApBlock& blk : blocks) {
    if (!(blk.sigma2_e > 0.0)) {
      throw PipelineError("centralized stack needs sigma2_e > 0 per AP");
    }
    const double scale = 1.0 / std::sqrt(blk.sigma2_e / 2.0);
    row_scale_.push_back(scale);
    const int nb = static_cast<int>(blk.b_hat.rows());
    for (std::size_t j = 0; j < blk.users.size(); ++j) {
      const auto it = std::lower_bound(union_users_.begin(),
                                       union_users_.end(), blk.users[j]);
      const int col = static_cast<int>(it - union_users_.begin());
      stacked.block(row0, col, nb, 1) = scale * blk.b_hat.col(j);
    }
    row0 += nb;
  }
  // Unit per-real-dimension noise after row scaling => total variance 2.
  pm_ = std::make_unique<PmDetector>(realify_matrix(stacked), 2.0, map,
                                     std::min(r, 2 * nu));
}

DetectorOutput CentralizedPmDetector::run(
    const std::vector<CVec>& y_per_ap) const {
  if (y_per_ap.size() != row_scale_.size()) {
    throw PipelineError("centralized stack: observation count mismatch");
  }
  CVec y(n_ap_rows_);
  int row0 = 0;
  for (std::size_t b = 0; b < y_per_ap.size(); ++b) {
    y.segment(row0, y_per_ap[b].size()) = row_scale_[b] * y_per_ap[b];
    row0 += static_cast<int>(y_per_ap[b].size());
  }
  return pm_->run(realify_vector(y));
}

std::pair<int, int> CentralizedPmDetector::bit_indices(int user) const {
  const auto it =
      std::lower_bound(union_users_.begin(), union_users_.end(), user);
  if (it == union_users_.end() || *it != user) {
    throw PipelineError("user not present in centralized stack");
  }
  const int col = static_cast<int>(it - union_users_.begin());
  return {col, col + static_cast<int>(union_users_.size())};
}

DetectorOutput exact_ml_llrs(const Vec& y, const Mat& b_hat, double sigma2_e,
                             const BitMapping& map, int cap_bits) {
  return ExactMlDetector(b_hat, sigma2_e, map, cap_bits).run(y);
}

DetectorOutput pm_llrs(const Vec& y, const Mat& b_hat, double sigma2_e,
                       const BitMapping& map, int r) {
  return PmDetector(b_hat, sigma2_e, map, r).run(y);
}

DetectorOutput mmse_sic_llrs(const Vec& y, const Mat& b_hat, double sigma2_e,
                             const BitMapping& map) {
  return MmseSicDetector(b_hat, sigma2_e, map).run(y);
}

DetectorOutput mrc_llrs(const Vec& y, const Mat& b_hat, double sigma2_e,
                        const BitMapping& map) {
  return MrcDetector(b_hat, sigma2_e, map).run(y);
}

DetectorOutput centralized_pm_llrs(const std::vector<ApBlock>& blocks,
                                   const std::vector<CVec>& y_per_ap,
                                   const BitMapping& map, int r) {
  return CentralizedPmDetector(blocks, map, r).run(y_per_ap);
}

}  // namespace cfsim
