#include "pbad/collocation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pbad {

namespace {

// Legendre polynomial value and derivative via the three-term recurrence.
std::pair<double, double> legendre_eval(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  const double d = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, d};
}

}  // namespace

std::vector<double> legendre_points(int order) {
  if (order < 2) throw std::invalid_argument("collocation order must be >= 2");
  const int n = order - 2;
  std::vector<double> roots(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev initial guess, then Newton to 1e-14.
    double x = -std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, d] = legendre_eval(n, x);
      const double dx = p / d;
      x -= dx;
      if (std::abs(dx) < 1e-14) break;
    }
    roots[i] = 0.5 * (x + 1.0);
  }
  roots.push_back(1.0);
  return roots;
}

VecX CollocationScheme::stencil_d1(int m) const {
  const int k = point_count();
  VecX mono = VecX::Zero(k);
  const double t = times[unknown_index(m)];
  for (int p = 1; p < k; ++p) mono[p] = p * std::pow(t, p - 1);
  return H * mono;
}

CollocationScheme build_scheme(int order, double dt) {
  if (order < 2) throw std::invalid_argument("collocation order must be >= 2");
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");

  CollocationScheme s;
  s.order = order;
  s.alphas = legendre_points(order);

  // K+1 points: the last two instants of the previous step window
  // followed by the current-step instants. For K = 2 the previous
  // window contributes (k-1, k).
  const int k = order + 1;
  s.times.reserve(k);
  if (order == 2) {
    s.times = {-1.0, 0.0};
  } else {
    s.times = {s.alphas[order - 3] - 1.0, 0.0};
  }
  for (double a : s.alphas) s.times.push_back(a);

  MatX vandermonde(k, k);
  for (int j = 0; j < k; ++j) {
    double pw = 1.0;
    for (int p = 0; p < k; ++p) {
      vandermonde(p, j) = pw;
      pw *= s.times[j];
    }
  }
  Eigen::FullPivLU<MatX> lu(vandermonde);
  if (!lu.isInvertible()) {
    throw std::runtime_error("collocation times produced a singular Vandermonde system");
  }
  s.H = lu.inverse();

  MatX mono2 = MatX::Zero(k, k);
  for (int j = 0; j < k; ++j) {
    for (int p = 2; p < k; ++p) {
      mono2(p, j) = p * (p - 1) * std::pow(s.times[j], p - 2);
    }
  }
  s.H2 = s.H * mono2;
  return s;
}

}  // namespace pbad
