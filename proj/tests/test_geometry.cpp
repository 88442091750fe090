#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cfsim/geometry.hpp"
#include "test_util.hpp"

using namespace cfsim;

TEST_CASE("wrap_distance on the torus") {
  CHECK(wrap_distance({0, 0}, {900, 0}, 1000) == doctest::Approx(100.0));
  CHECK(wrap_distance({123, 456}, {123, 456}, 1000) == doctest::Approx(0.0));
  // No wrap active: plain Euclidean sqrt(100^2 + 200^2).
  CHECK(wrap_distance({100, 100}, {200, 300}, 1000) ==
        doctest::Approx(223.6068).epsilon(1e-6));

  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d a(rng.uniform(0, 1000), rng.uniform(0, 1000));
    const Eigen::Vector2d b(rng.uniform(0, 1000), rng.uniform(0, 1000));
    const Eigen::Vector2d c(rng.uniform(0, 1000), rng.uniform(0, 1000));
    const double ab = wrap_distance(a, b, 1000);
    CHECK(ab <= 1000.0 * M_SQRT2 / 2.0 + 1e-12);
    CHECK(ab == doctest::Approx(wrap_distance(b, a, 1000)));
    CHECK(ab <= wrap_distance(a, c, 1000) + wrap_distance(c, b, 1000) + 1e-12);
  }
}

TEST_CASE("single-slope path loss") {
  const PathLossParams p;  // 140.7 + 36.7 log10(d / 1 km), d_min 10 m
  CHECK(path_loss_db(100.0, p) == doctest::Approx(104.0).epsilon(1e-9));
  CHECK(path_loss_db(1000.0, p) == doctest::Approx(140.7).epsilon(1e-9));
  CHECK(path_loss_db(3.0, p) == doctest::Approx(path_loss_db(10.0, p)));

  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double d1 = rng.uniform(1.0, 2000.0);
    const double d2 = d1 + rng.uniform(0.0, 500.0);
    CHECK(path_loss_db(d1, p) <= path_loss_db(d2, p) + 1e-12);
  }

  PathLossParams bad = p;
  bad.d_min_m = 0.0;
  CHECK_THROWS_AS(path_loss_db(100.0, bad), ConfigError);
}

TEST_CASE("noise power from PSD, bandwidth and noise figure") {
  Deployment dep;  // -174 dBm/Hz, 20 MHz, NF 9 dB
  const double watts = dep.noise_power_w();
  CHECK(watts_to_dbm(watts) == doctest::Approx(-91.9897).epsilon(1e-4));
  CHECK(watts == doctest::Approx(6.31e-13).epsilon(0.005));
}

TEST_CASE("shadowing: degenerate and correlated cases") {
  Rng rng(7);
  Deployment dep =
      make_deployment(5, 4, 2, 1000, 1.9e9, 20e6, 9, -174, false, rng);

  SUBCASE("zero variance gives an all-zero map") {
    ShadowingParams p;
    p.sigma_db = 0.0;
    CHECK(draw_shadowing(dep, rng, p).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("co-located users share their shadow values per AP") {
    dep.user_positions[1] = dep.user_positions[0];
    testutil::LogCapture logs;  // singular covariance -> nearest-PSD fallback
    ShadowingParams p;
    const Mat shadow = draw_shadowing(dep, rng, p);
    for (int m = 0; m < dep.num_aps(); ++m) {
      CHECK(shadow(m, 0) == doctest::Approx(shadow(m, 1)).epsilon(1e-9));
    }
    CHECK(logs.contains("nearest-PSD"));
  }
}

TEST_CASE("shadowing correlation matches the exponential decay model") {
  // Monte Carlo oracle: users 50 m apart with d_corr = 100 m should show
  // E[s1 s2] = 2^(-0.5) sigma^2 within 3% over 1e5 AP draws.
  Deployment dep;
  dep.side_m = 1000.0;
  dep.user_positions = {{100.0, 100.0}, {150.0, 100.0}};
  dep.ap_positions.assign(100000, Eigen::Vector2d(0.0, 0.0));
  ShadowingParams p;  // sigma 8 dB, d_corr 100 m
  Rng rng(11);
  const Mat shadow = draw_shadowing(dep, rng, p);
  double cross = 0.0;
  for (int m = 0; m < dep.num_aps(); ++m) cross += shadow(m, 0) * shadow(m, 1);
  cross /= dep.num_aps();
  const double expect = std::exp2(-0.5) * p.sigma_db * p.sigma_db;
  CHECK(cross == doctest::Approx(expect).epsilon(0.03));
}

TEST_CASE("correlation matrices: uncorrelated mode") {
  LargeScaleMap ls;
  ls.beta = Mat::Constant(1, 1, 2.0);
  ls.shadow_db = Mat::Zero(1, 1);
  const CorrelationSet corr = build_correlations(ls, 2);
  CHECK((corr.r(0, 0) - 2.0 * CMat::Identity(2, 2)).cwiseAbs().maxCoeff() ==
        0.0);

  ls.beta(0, 0) = 1e-10;
  const CorrelationSet tiny = build_correlations(ls, 2);
  CHECK(tiny.beta(0, 0) == doctest::Approx(1e-10));
  Eigen::SelfAdjointEigenSolver<CMat> es(tiny.r(0, 0));
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("correlation matrices: custom template validation") {
  LargeScaleMap ls;
  ls.beta = Mat::Constant(1, 1, 1.0);
  ls.shadow_db = Mat::Zero(1, 1);

  SUBCASE("trace rule: tr(T)/N_AP must be 1") {
    // A supplied matrix with trace 4 against N_AP = 8 is rejected.
    const CMat t = 0.5 * CMat::Identity(8, 8);
    CHECK_THROWS_AS(build_correlations(ls, 8, t), ValidationError);
  }
  SUBCASE("non-Hermitian template is rejected") {
    CMat t = CMat::Identity(2, 2);
    t(0, 1) = cplx(0.3, 0.1);
    CHECK_THROWS_AS(build_correlations(ls, 2, t), ValidationError);
  }
  SUBCASE("indefinite template is rejected") {
    CMat t(2, 2);
    t << 1.9, 1.5, 1.5, 0.1;  // symmetric, trace 2, negative eigenvalue
    CHECK_THROWS_AS(build_correlations(ls, 2, t), ValidationError);
  }
  SUBCASE("valid template scales by beta and keeps the trace rule") {
    CMat t(2, 2);
    t << 1.4, cplx(0.2, 0.3), cplx(0.2, -0.3), 0.6;
    ls.beta(0, 0) = 3.5;
    const CorrelationSet corr = build_correlations(ls, 2, t);
    CHECK(corr.beta(0, 0) == doctest::Approx(3.5).epsilon(1e-9));
    CHECK((corr.r(0, 0) - 3.5 * t).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("trace invariant tr(R) = N_AP beta on a random drop") {
  Rng rng(13);
  Deployment dep =
      make_deployment(6, 5, 4, 1000, 1.9e9, 20e6, 9, -174, true, rng);
  const Mat shadow = draw_shadowing(dep, rng, ShadowingParams{});
  const LargeScaleMap ls = build_large_scale(dep, PathLossParams{}, shadow);
  const CorrelationSet corr = build_correlations(ls, 4);
  for (int m = 0; m < 6; ++m) {
    for (int k = 0; k < 5; ++k) {
      const double tr = corr.r(k, m).trace().real();
      CHECK(tr == doctest::Approx(4.0 * ls.beta(m, k)).epsilon(1e-9));
      CHECK(ls.beta(m, k) > 0.0);
    }
  }
}

TEST_CASE("channel draws follow the configured covariance") {
  SUBCASE("zero covariance gives zero channels") {
    CorrelationSet corr(1, 1, 2);
    corr.set(0, 0, CMat::Zero(2, 2));
    Rng rng(17);
    const ChannelRealization ch = draw_channels(corr, rng);
    CHECK(ch.of(0, 0).norm() == 0.0);
  }
  SUBCASE("empirical covariance matches beta I within 2%") {
    const double beta = 0.5;
    CorrelationSet corr(1, 1, 2);
    corr.set(0, 0, beta * CMat::Identity(2, 2));
    Rng rng(19);
    CMat cov = CMat::Zero(2, 2);
    double energy = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      const ChannelRealization ch = draw_channels(corr, rng);
      cov += ch.of(0, 0) * ch.of(0, 0).adjoint();
      energy += ch.of(0, 0).squaredNorm();
    }
    cov /= draws;
    energy /= draws;
    CHECK((cov - beta * CMat::Identity(2, 2)).norm() /
              (beta * CMat::Identity(2, 2)).norm() <
          0.02);
    CHECK(energy == doctest::Approx(2.0 * beta).epsilon(0.02));
  }
}
