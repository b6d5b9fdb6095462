#pragma once

#include <utility>

#include "pbad/adjoint.hpp"
#include "pbad/math_types.hpp"
#include "pbad/model.hpp"
#include "pbad/objective.hpp"

namespace pbad {

struct DynamicsState {
  Configuration q;
  VecX qdot;
};

enum class BaselineScheme { forward_euler, semi_implicit, rk2, rk3, rk4 };

/// Generalized mass matrix and Coriolis vector in trace form:
///   M_jl = sum_i tr(dT^i/dq_j S_i dT^i/dq_l^T)
///   c_j  = sum_i tr(dT^i/dq_j S_i (sum_lm qd_l qd_m d2T^i/dq_l dq_m)^T)
std::pair<MatX, VecX> mass_and_coriolis(const KinematicModel& model,
                                        const DynamicsState& state);

/// Generalized applied force: gravity, actuation, and explicit drag and
/// contact penalties evaluated at the current state. dt feeds the
/// penalty model's velocity scaling so it matches the PBAD potentials.
VecX generalized_force(const KinematicModel& model, const ForceModel& forces,
                       const DynamicsState& state, double dt);

/// One explicit integration step of the Newton-Euler equation.
/// Throws on a singular mass matrix.
DynamicsState baseline_step(const KinematicModel& model, const DynamicsState& state,
                            const ForceModel& forces, double dt, BaselineScheme scheme);

/// 1/2 sum_i tr(Tdot S_i Tdot^T) with the analytic Tdot of (q, qdot).
double kinetic_energy(const KinematicModel& model, const Configuration& q,
                      const VecX& qdot);

/// -g . sum_i (T^i S_i e4); zero level at the world origin.
double gravity_potential(const KinematicModel& model, const Vec3& gravity,
                         const Configuration& q);

}  // namespace pbad
