#pragma once

#include <functional>
#include <random>

#include "pbad/adjoint.hpp"
#include "pbad/kinematics.hpp"
#include "pbad/model.hpp"

namespace pbad::testing {

constexpr double kFdStep = 1e-5;

inline double rel_err(double analytic, double reference) {
  return std::abs(analytic - reference) / std::max(1.0, std::abs(reference));
}

inline double rel_err(const MatX& analytic, const MatX& reference) {
  const double scale = std::max(1.0, reference.cwiseAbs().maxCoeff());
  return (analytic - reference).cwiseAbs().maxCoeff() / scale;
}

inline double rel_err(const VecX& analytic, const VecX& reference) {
  const double scale = std::max(1.0, reference.cwiseAbs().maxCoeff());
  return (analytic - reference).cwiseAbs().maxCoeff() / scale;
}

/// Central finite-difference gradient of a scalar function.
inline VecX fd_gradient(const std::function<double(const VecX&)>& f, const VecX& x,
                        double h = kFdStep) {
  VecX g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    VecX xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// Central finite-difference Jacobian of a vector function; column j is
/// the derivative with respect to x_j.
inline MatX fd_jacobian(const std::function<VecX(const VecX&)>& f, const VecX& x,
                        double h = kFdStep) {
  const VecX f0 = f(x);
  MatX jac(f0.size(), x.size());
  for (int j = 0; j < x.size(); ++j) {
    VecX xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

inline VecX random_vec(std::mt19937& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> uni(lo, hi);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = uni(rng);
  return v;
}

inline Mat4 random_offset(std::mt19937& rng) {
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() =
      rotation_vector_matrix(Vec3(uni(rng), uni(rng), uni(rng)));
  m.topRightCorner<3, 1>() = Vec3(2 * uni(rng), 2 * uni(rng), 2 * uni(rng));
  return m;
}

/// Random articulated tree mixing hinge, ball and free joints. With
/// chain=true parents are sequential.
inline KinematicModel random_tree(std::mt19937& rng, int links, bool chain = false) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<LinkSpec> specs;
  for (int i = 0; i < links; ++i) {
    LinkSpec link;
    if (i == 0) {
      link.parent = std::nullopt;
    } else if (chain) {
      link.parent = i - 1;
    } else {
      link.parent = std::uniform_int_distribution<int>(0, i - 1)(rng);
    }
    const double kind = uni(rng);
    if (i == 0 && kind < 0.3) {
      link.joint.kind = JointKind::free_joint;
    } else if (kind < 0.55) {
      link.joint.kind = JointKind::ball;
    } else {
      link.joint.kind = JointKind::hinge;
      Vec3 axis(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5);
      if (axis.norm() < 1e-3) axis = Vec3::UnitZ();
      link.joint.axis = axis.normalized();
    }
    link.joint.offset = random_offset(rng);
    if (uni(rng) < 0.25) {
      PointMassGeometry pm;
      const int count = 1 + static_cast<int>(uni(rng) * 3);
      for (int p = 0; p < count; ++p) {
        pm.masses.push_back(
            {0.1 + uni(rng), Vec3(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5)});
      }
      link.geometry = pm;
    } else {
      BoxGeometry box;
      box.size = Vec3(0.2 + uni(rng), 0.2 + uni(rng), 0.2 + uni(rng));
      box.density = 200.0 + 1800.0 * uni(rng);
      box.center = Vec3(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5);
      link.geometry = box;
    }
    specs.push_back(link);
  }
  return build_model(std::move(specs));
}

/// Hinge chain with unit x offsets, the planar-geometry fixture.
inline KinematicModel planar_chain(int links, const Vec3& axis = Vec3::UnitZ()) {
  std::vector<LinkSpec> specs;
  for (int i = 0; i < links; ++i) {
    LinkSpec link;
    link.parent = i == 0 ? std::nullopt : std::optional<int>(i - 1);
    link.joint.kind = JointKind::hinge;
    link.joint.axis = axis;
    link.joint.offset = Mat4::Identity();
    link.joint.offset(0, 3) = 1.0;
    BoxGeometry box;
    box.size = Vec3(1.0, 0.1, 0.1);
    box.density = 1000.0;
    box.center = Vec3(0.5, 0.0, 0.0);
    link.geometry = box;
    specs.push_back(link);
  }
  return build_model(std::move(specs));
}

/// Correlation value by direct summation over world transforms, no
/// adjoint machinery involved.
inline double naive_correlation(const KinematicModel& model, const VecX& qa,
                                const VecX& qb) {
  const auto ta = forward_pass(model, qa);
  const auto tb = forward_pass(model, qb);
  double value = 0.0;
  for (int i = 0; i < model.link_count(); ++i) {
    value += (ta[i].transpose() * tb[i] * model.body_integrals[i].S).trace() -
             model.body_integrals[i].mass;
  }
  return value;
}

}  // namespace pbad::testing
