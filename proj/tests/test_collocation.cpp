#include <doctest.h>

#include <cmath>

#include "pbad/collocation.hpp"
#include "test_helpers.hpp"

using namespace pbad;

TEST_CASE("legendre points") {
  SUBCASE("K=2 has no interior points") {
    const auto a = legendre_points(2);
    REQUIRE(a.size() == 1);
    CHECK(a[0] == 1.0);
  }
  SUBCASE("K=3 uses the L1 root") {
    const auto a = legendre_points(3);
    REQUIRE(a.size() == 2);
    CHECK(a[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(a[1] == 1.0);
  }
  SUBCASE("K=4 uses the L2 roots") {
    const auto a = legendre_points(4);
    REQUIRE(a.size() == 3);
    // roots of (3x^2-1)/2 mapped to [0,1]
    CHECK(a[0] == doctest::Approx(0.2113248654051871).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(0.7886751345948129).epsilon(1e-12));
    CHECK(a[2] == 1.0);
  }
  SUBCASE("interior roots are symmetric about one half") {
    for (int k = 3; k <= 6; ++k) {
      const auto a = legendre_points(k);
      for (int i = 0; i + 1 < static_cast<int>(a.size()); ++i) {
        const double mirror = a[a.size() - 2 - i];
        CHECK(std::abs(a[i] + mirror - 1.0) < 1e-12);
      }
    }
  }
  SUBCASE("K<2 rejected") { CHECK_THROWS(legendre_points(1)); }
}

TEST_CASE("scheme interpolation identity H V = I") {
  for (int k : {2, 3, 4}) {
    const CollocationScheme s = build_scheme(k, 0.01);
    MatX v(k + 1, k + 1);
    for (int j = 0; j <= k; ++j) {
      for (int p = 0; p <= k; ++p) v(p, j) = std::pow(s.times[j], p);
    }
    CHECK(((s.H * v) - MatX::Identity(k + 1, k + 1)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("K=2 second-derivative stencil is (1,-2,1)") {
  const CollocationScheme s = build_scheme(2, 0.25);
  const VecX w = s.stencil(0);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(w[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("K=3 stencil differentiates cubics exactly at the collocation instants") {
  const CollocationScheme s = build_scheme(3, 0.1);
  auto check_poly = [&](auto f, auto d2f) {
    VecX samples(4);
    for (int j = 0; j < 4; ++j) samples[j] = f(s.times[j]);
    for (int m = 0; m < s.unknown_count(); ++m) {
      const double tau = s.times[s.unknown_index(m)];
      const double approx = s.stencil(m).dot(samples);
      CHECK(std::abs(approx - d2f(tau)) < 1e-10);
    }
  };
  check_poly([](double t) { return t * t; }, [](double) { return 2.0; });
  check_poly([](double t) { return t * t * t; }, [](double t) { return 6.0 * t; });
}

TEST_CASE("exactness up to degree K") {
  for (int k : {2, 3, 4, 5, 6}) {
    const CollocationScheme s = build_scheme(k, 0.01);
    // polynomial with all powers up to K
    auto f = [&](double t) {
      double v = 0.3, pw = 1.0;
      for (int p = 1; p <= k; ++p) {
        pw *= t;
        v += (0.7 - 0.13 * p) * pw;
      }
      return v;
    };
    auto d2 = [&](double t) {
      double v = 0.0, pw = 1.0;
      for (int p = 2; p <= k; ++p) {
        v += (0.7 - 0.13 * p) * p * (p - 1) * pw;
        pw *= t;
      }
      return v;
    };
    VecX samples(k + 1);
    for (int j = 0; j <= k; ++j) samples[j] = f(s.times[j]);
    for (int m = 0; m < s.unknown_count(); ++m) {
      const double tau = s.times[s.unknown_index(m)];
      const double expected = d2(tau);
      CHECK(std::abs(s.stencil(m).dot(samples) - expected) <
            1e-9 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST_CASE("scheme validation") {
  CHECK_THROWS(build_scheme(1, 0.1));
  CHECK_THROWS(build_scheme(3, 0.0));
  const CollocationScheme s = build_scheme(4, 0.1);
  REQUIRE(s.times.size() == 5);
  CHECK(s.times.back() == 1.0);
  for (size_t i = 0; i + 1 < s.times.size(); ++i) CHECK(s.times[i] < s.times[i + 1]);
  CHECK(s.alphas.back() == 1.0);
}
