#pragma once

#include <utility>
#include <vector>

#include "pbad/kinematics.hpp"
#include "pbad/math_types.hpp"
#include "pbad/model.hpp"

namespace pbad {

/// Arguments of the correlation functional I(qa, qb) = sum over bodies
/// of the mass-weighted workspace inner product of the two poses,
/// minus the total (weighted) mass.
struct CorrelationRequest {
  const KinematicModel* model = nullptr;
  Configuration qa;
  Configuration qb;
  VecX weight_per_body;  // empty = all ones
};

struct CorrelationDerivatives {
  double value = 0.0;
  VecX grad_b;
  MatX hess_bb;
  MatX hess_ab;
};

/// Kinematic quantities of one configuration that every adjoint pass
/// needs: joint jets, world transforms, and the per-DOF "lever"
/// matrices parent_world * dT/dq_j.
struct ConfigPass {
  std::vector<JointJet> jets;
  std::vector<Mat4> world;
  std::vector<Mat4> parent_world;
  std::vector<std::vector<Mat4>> lever;  // [link][local dof]

  static ConfigPass make(const KinematicModel& model, const Configuration& q);
};

/// Per-body mass weights folded into the body integrals.
struct WeightedBody {
  std::vector<Mat4> S;  // weight * body integral
  double weighted_mass = 0.0;

  static WeightedBody make(const KinematicModel& model, const VecX& weights);
};

// --- Linear functionals of the world transforms -------------------------
// f(q) = sum_i ddot(C_i, T^i(q)). Gravity, actuated point forces, and the
// correlation gradient itself all reduce to this shape with different
// cotangent seeds C_i.

double functional_value(const std::vector<Mat4>& seeds, const ConfigPass& pass);
VecX functional_grad(const KinematicModel& model, const std::vector<Mat4>& seeds,
                     const ConfigPass& pass);
MatX functional_hess(const KinematicModel& model, const std::vector<Mat4>& seeds,
                     const ConfigPass& pass);

// --- Correlation functional ---------------------------------------------

double correlation_value(const KinematicModel& model, const WeightedBody& wb,
                         const ConfigPass& pass_a, const ConfigPass& pass_b);

/// Gradient with respect to qb via one O(N) backward pass.
VecX correlation_grad_b(const KinematicModel& model, const WeightedBody& wb,
                        const ConfigPass& pass_a, const ConfigPass& pass_b);

/// Exact second derivative with respect to qb, O(N^2).
MatX correlation_hess_bb(const KinematicModel& model, const WeightedBody& wb,
                         const ConfigPass& pass_a, const ConfigPass& pass_b);

/// Exact mixed second derivative d2 I / dqa dqb, O(N^2). Entry (j, k)
/// differentiates qa_j and qb_k.
MatX correlation_hess_ab(const KinematicModel& model, const WeightedBody& wb,
                         const ConfigPass& pass_a, const ConfigPass& pass_b);

// --- Spec-shaped wrappers ------------------------------------------------

std::pair<double, VecX> correlation_and_grad(const CorrelationRequest& req);
MatX hessian_bb(const CorrelationRequest& req);
MatX hessian_ab(const CorrelationRequest& req);

/// Evaluates value, grad_b, hess_bb and hess_ab with one work item per
/// link on a worker pool. Each item runs O(N) inner loops over its own
/// subtree and ancestor path and writes disjoint output entries; the
/// scalar value is reduced in link order, so results match the serial
/// operations.
CorrelationDerivatives parallel_correlation_suite(const CorrelationRequest& req,
                                                  int workers);

}  // namespace pbad
