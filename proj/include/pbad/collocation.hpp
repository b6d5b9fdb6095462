#pragma once

#include <vector>

#include "pbad/math_types.hpp"

namespace pbad {

/// Collocation scheme of order K: K+1 collocation times in normalized
/// local units tau = (t - k*dt)/dt spanning the previous and current
/// step, the interpolation basis H (inverse Vandermonde), and the
/// second-derivative basis H2. The 1/dt^2 scaling of H2 is applied at
/// the use site.
struct CollocationScheme {
  int order = 2;                // K
  std::vector<double> alphas;   // K-1 values, last == 1
  std::vector<double> times;    // K+1 local times, ascending, times[K] == 1
  MatX H;                       // (K+1) x (K+1)
  MatX H2;                      // (K+1) x (K+1); column j = d2 stencil at times[j]

  int point_count() const { return order + 1; }
  int unknown_count() const { return order - 1; }
  /// Index into times/H2 columns of the m-th unknown instant, m in [0, K-2].
  int unknown_index(int m) const { return 2 + m; }
  /// Second-derivative stencil weights at the m-th unknown instant
  /// (multiply by 1/dt^2).
  VecX stencil(int m) const { return H2.col(unknown_index(m)); }
  /// First-derivative stencil weights at the m-th unknown instant
  /// (multiply by 1/dt).
  VecX stencil_d1(int m) const;
};

/// Interior collocation points: roots of the (K-2)-th Legendre
/// polynomial mapped from [-1,1] to [0,1], followed by 1.
std::vector<double> legendre_points(int order);

/// Builds the scheme for order K and timestep dt (dt only validated;
/// the basis is dimensionless in local time).
CollocationScheme build_scheme(int order, double dt);

}  // namespace pbad
