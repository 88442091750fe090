#include "cfsim/selfcheck.hpp"

#include <cmath>
#include <sstream>

#include "cfsim/coding.hpp"
#include "cfsim/detectors.hpp"
#include "cfsim/harness.hpp"
#include "cfsim/rng.hpp"
#include "cfsim/uplink.hpp"

namespace cfsim {

namespace {

// Naive reference LLR: double loop over every bit pattern, independent of the
// detector implementations.
Vec naive_llrs(const Vec& y, const Mat& b, double sigma2_e,
               const BitMapping& map) {
  const int n = static_cast<int>(b.cols());
  Vec llrs(n);
  for (int i = 0; i < n; ++i) {
    double num = 0.0;
    double den = 0.0;
    for (long h = 0; h < (1L << n); ++h) {
      Vec x(n);
      for (int j = 0; j < n; ++j) x(j) = map.amplitude((h >> j) & 1);
      const double metric = std::exp(-(y - b * x).squaredNorm() / sigma2_e);
      ((h >> i) & 1) != 0 ? num += metric : den += metric;
    }
    llrs(i) = std::log(num) - std::log(den);
  }
  return llrs;
}

Mat random_matrix(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

void add(std::vector<CheckResult>& out, const std::string& name, bool pass,
         const std::string& detail) {
  out.push_back(CheckResult{name, pass, detail});
}

}  // namespace

std::vector<CheckResult> run_selfcheck() {
  std::vector<CheckResult> out;
  const BitMapping map = BitMapping::qpsk();
  Rng rng(20260810u);

  {
    const double d = wrap_distance({0.0, 0.0}, {900.0, 0.0}, 1000.0);
    add(out, "wrap_distance torus shift", std::abs(d - 100.0) < 1e-12,
        "d(0,900|1000) = " + std::to_string(d));
  }
  {
    CVec v(2);
    v << cplx(1, 2), cplx(-3, 0.5);
    CMat a(2, 2);
    a << cplx(0, 1), cplx(2, -1), cplx(1, 1), cplx(0.5, 0);
    const double err =
        (realify_vector(a * v) - realify_matrix(a) * realify_vector(v))
            .norm();
    add(out, "realify linear-model identity", err < 1e-12,
        "residual " + std::to_string(err));
  }
  {
    bool pass = true;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(3));  // 2..4 real columns
      Mat b = random_matrix(2 * n, n, rng);
      Vec y = random_matrix(2 * n, 1, rng);
      const double s2 = 0.5 + rng.uniform();
      const Vec exact = exact_ml_llrs(y, b, s2, map).llrs;
      const Vec ref = naive_llrs(y, b, s2, map);
      const Vec pm = pm_llrs(y, b, s2, map, n).llrs;
      worst = std::max(worst, (exact - ref).cwiseAbs().maxCoeff());
      worst = std::max(worst, (pm - ref).cwiseAbs().maxCoeff());
      if (worst > 1e-9) pass = false;
    }
    add(out, "exact ML and full-r PM vs naive enumeration", pass,
        "max |diff| = " + std::to_string(worst));
  }
  {
    // Scale invariance: y, B times c and sigma2 times c^2 leave LLRs alone.
    Mat b = random_matrix(4, 3, rng);
    Vec y = random_matrix(4, 1, rng);
    const double c = 3.7;
    const Vec l1 = pm_llrs(y, b, 1.3, map, 2).llrs;
    const Vec l2 = pm_llrs(c * y, c * b, c * c * 1.3, map, 2).llrs;
    const double err = (l1 - l2).cwiseAbs().maxCoeff();
    add(out, "detector metric scale invariance", err < 1e-9,
        "max |diff| = " + std::to_string(err));
  }
  {
    // MMSE estimator split: p R Gamma^-1 R + C = R.
    const int n_ap = 4;
    LargeScaleMap ls;
    ls.beta = Mat::Constant(2, 3, 1.0);
    ls.beta(0, 1) = 0.3;
    ls.shadow_db = Mat::Zero(2, 3);
    const CorrelationSet corr = build_correlations(ls, n_ap);
    PilotBook pilots = make_pilot_book(3, 2, PilotPolicy::kRoundRobin);
    TrainingPowers powers;
    powers.tau_p = 2;
    powers.p_tilde_w = Vec::Constant(3, 0.5);
    double worst = 0.0;
    for (int m = 0; m < 2; ++m) {
      for (int k = 0; k < 3; ++k) {
        const CMat gamma = gamma_matrix(k, m, corr, pilots, powers, 0.2);
        const CMat c = error_covariance(k, m, corr, powers, gamma);
        const CMat lhs =
            std::sqrt(powers.p(k)) *
                mmse_projection(k, m, corr, powers, gamma) * corr.r(k, m) +
            c;
        worst = std::max(worst,
                         (lhs - corr.r(k, m)).cwiseAbs().maxCoeff());
      }
    }
    add(out, "covariance split p R G^-1 R + C = R", worst < 1e-9,
        "max |diff| = " + std::to_string(worst));
  }
  {
    const CodeConfig code = CodeConfig::make(100, 7, {"133", "171", "165"});
    bool pass = true;
    for (int trial = 0; trial < 50 && pass; ++trial) {
      std::vector<int> info(code.info_block_bits);
      for (int& b : info) b = static_cast<int>(rng.below(2));
      const std::vector<int> coded = conv_encode(info, code);
      Vec llrs(code.coded_bits());
      for (std::size_t i = 0; i < coded.size(); ++i) {
        llrs(i) = coded[i] != 0 ? kLlrClamp : -kLlrClamp;
      }
      pass = viterbi_decode(llrs, code) == info &&
             viterbi_decode(0.01 * llrs, code) == info;
    }
    add(out, "coding round trip + LLR scale invariance", pass,
        pass ? "50 frames" : "decode mismatch");
  }
  {
    LlrFrame frame;
    frame.local.assign(3, std::vector<Vec>(1));
    frame.local[0][0] = Vec::Constant(1, 2.0);
    frame.local[1][0] = Vec::Constant(1, -0.5);
    frame.local[2][0] = Vec::Constant(1, 1.0);
    const Vec fused = fuse_llrs(frame, 0, {0, 1, 2});
    add(out, "LLR fusion sum", std::abs(fused(0) - 2.5) < 1e-12,
        "fused = " + std::to_string(fused(0)));
  }
  {
    Rng a = Rng::substream(42, Stream::kChannels, 0, 7);
    Rng b = Rng::substream(42, Stream::kChannels, 0, 7);
    Rng c = Rng::substream(42, Stream::kChannels, 0, 8);
    bool same = true;
    bool distinct = false;
    for (int i = 0; i < 64; ++i) {
      const auto x = a.next_u64();
      same = same && x == b.next_u64();
      distinct = distinct || x != c.next_u64();
    }
    add(out, "substream replay determinism", same && distinct,
        same ? "64 draws replayed" : "replay mismatch");
  }
  return out;
}

std::string format_selfcheck(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  int failed = 0;
  for (const CheckResult& r : results) {
    os << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.detail
       << ")\n";
    if (!r.pass) ++failed;
  }
  os << results.size() - failed << "/" << results.size() << " checks passed\n";
  return os.str();
}

}  // namespace cfsim
