#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <vector>

#include "pbad/adjoint.hpp"
#include "pbad/collocation.hpp"
#include "pbad/math_types.hpp"
#include "pbad/model.hpp"

namespace pbad {

/// Penalty ground-plane contact: points at signed distance
/// d = plane_offset - n.x below the plane are penalized with a normal
/// term d1*d^2 and a tangential damping term d2*d^2*|Proj (dx/dt)|^2
/// per contact sample.
struct ContactModel {
  Vec3 plane_normal = Vec3::UnitZ();
  double plane_offset = 0.0;
  double d1 = 0.0;  // normal penalty
  double d2 = 0.0;  // friction penalty
};

/// Open-loop joint-space actuation profile.
struct ActuationSpec {
  enum class Kind { constant, sinusoidal };
  Kind kind = Kind::constant;
  VecX amplitude;  // per DOF
  double frequency_hz = 0.0;
  VecX phase;  // per DOF, radians (sinusoidal only)

  VecX tau_at(double t) const {
    if (kind == Kind::constant) return amplitude;
    VecX tau(amplitude.size());
    for (int i = 0; i < amplitude.size(); ++i) {
      const double ph = i < phase.size() ? phase[i] : 0.0;
      tau[i] = amplitude[i] * std::sin(2.0 * std::numbers::pi * frequency_hz * t + ph);
    }
    return tau;
  }
};

struct ForceModel {
  Vec3 gravity = Vec3::Zero();
  double drag_d = 0.0;
  std::optional<ContactModel> contact;
  VecX tau;  // generalized actuation; empty means zero
  std::optional<ActuationSpec> actuation;  // time-varying override of tau

  VecX tau_at(double t, int dofs) const {
    if (actuation && actuation->amplitude.size() == dofs) return actuation->tau_at(t);
    if (tau.size() == dofs) return tau;
    return VecX::Zero(dofs);
  }
};

enum class ObjectiveKind { energy_form, residual_form };

/// One PBAD step descriptor handed to an optimizer: model, collocation
/// window history, timestep, forces, and which objective to assemble.
struct StepProblem {
  const KinematicModel* model = nullptr;
  const CollocationScheme* scheme = nullptr;
  std::vector<Configuration> history;  // q at times[0] and times[1]
  double dt = 0.0;
  ForceModel forces;
  ObjectiveKind kind = ObjectiveKind::energy_form;
  // Actuation per unknown collocation instant (residual form); when empty,
  // forces.tau applies at every instant.
  std::vector<VecX> tau_at_instants;
};

struct ObjectiveEval {
  double value = 0.0;
  VecX grad;
  std::optional<MatX> gn_matrix;
};

struct PotentialEval {
  double value = 0.0;
  VecX grad;
  MatX gn;    // Gauss-Newton blocks (sum-of-squares structure only)
  MatX hess;  // exact Hessian, filled when requested
};

/// Gravity + drag + contact potentials of one configuration against a
/// reference q_prev (backward-difference velocities over dt).
PotentialEval eval_potentials(const KinematicModel& model, const ForceModel& forces,
                              const Configuration& q_next, const Configuration& q_prev,
                              double dt, bool want_gn = true, bool want_hess = false);

/// Second-order energy objective (K == 2, integrable forces).
ObjectiveEval eval_energy_form(const StepProblem& problem, const Configuration& q_next,
                               bool want_gn = true);

/// Squared-residual objective for any K; q_star stacks the K-1 unknown
/// configurations.
ObjectiveEval eval_residual_form(const StepProblem& problem, const VecX& q_star,
                                 bool want_gn = true);

/// Evaluator interface handed to the optimizers. Implementations must be
/// pure functions of x so concurrent evaluations are safe.
class ObjectiveFunction {
 public:
  virtual ~ObjectiveFunction() = default;
  virtual int dim() const = 0;
  virtual double value(const VecX& x) const = 0;
  virtual ObjectiveEval evaluate(const VecX& x, bool want_gn) const = 0;
};

/// Step objective adapter with per-step cached history passes.
class StepObjective final : public ObjectiveFunction {
 public:
  explicit StepObjective(const StepProblem& problem);
  ~StepObjective() override;

  int dim() const override;
  double value(const VecX& x) const override;
  ObjectiveEval evaluate(const VecX& x, bool want_gn) const override;

  const StepProblem& problem() const { return problem_; }

 private:
  struct Cache;
  ObjectiveEval evaluate_impl(const VecX& x, bool want_grad, bool want_gn) const;

  const StepProblem& problem_;
  std::unique_ptr<Cache> cache_;
};

}  // namespace pbad
