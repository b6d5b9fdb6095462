#include "pbad/baseline.hpp"

#include <Eigen/Cholesky>

#include <stdexcept>

namespace pbad {

namespace {

// World transform time derivatives along the tree:
//   Tdot^i = Tdot^p L_i + T^p Ldot_i
// and the velocity-quadratic part of the acceleration,
//   C^i = C^p L_i + 2 Tdot^p Ldot_i + T^p (sum_jl qd_j qd_l d2L_i).
struct VelocityPass {
  std::vector<Mat4> tdot;
  std::vector<Mat4> quad;  // velocity-squared acceleration part
};

VelocityPass velocity_pass(const KinematicModel& model, const ConfigPass& pass,
                           const VecX& qdot, bool need_quad) {
  const int n = model.link_count();
  VelocityPass out;
  out.tdot.assign(n, Mat4::Zero());
  if (need_quad) out.quad.assign(n, Mat4::Zero());
  for (int i = 0; i < n; ++i) {
    const int p = model.parent(i);
    const int off = model.dof_offset(i);
    const int dof = model.dof_count(i);
    const JointJet& jet = pass.jets[i];

    Mat4 ldot = Mat4::Zero();
    for (int j = 0; j < dof; ++j) ldot += qdot[off + j] * jet.d1[j];

    const Mat4& parent_world = pass.parent_world[i];
    const Mat4 parent_tdot = (p >= 0) ? out.tdot[p] : Mat4::Zero();
    out.tdot[i] = parent_tdot * jet.value + parent_world * ldot;

    if (need_quad) {
      Mat4 lquad = Mat4::Zero();
      for (int l = 0; l < dof; ++l) {
        for (int j = 0; j < dof; ++j) {
          lquad += qdot[off + j] * qdot[off + l] * jet.d2_at(j, l);
        }
      }
      const Mat4 parent_quad = (p >= 0) ? out.quad[p] : Mat4::Zero();
      out.quad[i] =
          parent_quad * jet.value + 2.0 * parent_tdot * ldot + parent_world * lquad;
    }
  }
  return out;
}

}  // namespace

std::pair<MatX, VecX> mass_and_coriolis(const KinematicModel& model,
                                        const DynamicsState& state) {
  validate_configuration(model, state.q);
  if (state.qdot.size() != model.total_dofs) {
    throw ModelError("velocity length does not match model DOF count");
  }
  const WeightedBody wb = WeightedBody::make(model, VecX());
  const ConfigPass pass = ConfigPass::make(model, state.q);
  MatX mass = correlation_hess_ab(model, wb, pass, pass);

  const VelocityPass vel = velocity_pass(model, pass, state.qdot, true);
  std::vector<Mat4> seeds(model.link_count());
  for (int i = 0; i < model.link_count(); ++i) {
    seeds[i] = vel.quad[i] * model.body_integrals[i].S;
  }
  VecX coriolis = functional_grad(model, seeds, pass);
  return {std::move(mass), std::move(coriolis)};
}

VecX generalized_force(const KinematicModel& model, const ForceModel& forces,
                       const DynamicsState& state, double dt) {
  const ConfigPass pass = ConfigPass::make(model, state.q);
  const int n = model.link_count();
  std::vector<Mat4> cot(n, Mat4::Zero());
  bool have = false;

  if (!forces.gravity.isZero()) {
    Vec4 ghat;
    ghat << forces.gravity, 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec4 u = model.body_integrals[i].S * Vec4(0, 0, 0, 1);
      cot[i] += ghat * u.transpose();  // force = -dQ/dq, sign folded here
    }
    have = true;
  }

  const bool needs_velocity =
      forces.drag_d > 0.0 || (forces.contact && forces.contact->d2 > 0.0);
  VelocityPass vel;
  if (needs_velocity) vel = velocity_pass(model, pass, state.qdot, false);

  if (forces.drag_d > 0.0) {
    const double scale = 2.0 * forces.drag_d / dt;
    for (int i = 0; i < n; ++i) {
      cot[i] -= scale * vel.tdot[i] * model.body_integrals[i].S;
    }
    have = true;
  }

  if (forces.contact && (forces.contact->d1 > 0.0 || forces.contact->d2 > 0.0)) {
    const ContactModel& cm = *forces.contact;
    const Vec3& nrm = cm.plane_normal;
    const Mat3 proj = Mat3::Identity() - nrm * nrm.transpose();
    for (int i = 0; i < n; ++i) {
      for (const Vec3& sample : model.links[i].contact_samples) {
        Vec4 ph;
        ph << sample, 1.0;
        const Vec3 x = (pass.world[i] * ph).head<3>();
        const double depth = cm.plane_offset - nrm.dot(x);
        if (depth <= 0.0) continue;
        Vec3 f = 2.0 * cm.d1 * depth * nrm;
        if (cm.d2 > 0.0) {
          const Vec3 v = (vel.tdot[i] * ph).head<3>();
          const Vec3 pv = proj * v;
          f += 2.0 * cm.d2 * depth * pv.squaredNorm() * nrm -
               (2.0 * cm.d2 * depth * depth / dt) * pv;
        }
        Vec4 fh;
        fh << f, 0.0;
        cot[i] += fh * ph.transpose();
        have = true;
      }
    }
  }

  VecX out = have ? functional_grad(model, cot, pass) : VecX::Zero(model.total_dofs);
  if (forces.tau.size() == model.total_dofs) out += forces.tau;
  return out;
}

namespace {

VecX acceleration(const KinematicModel& model, const ForceModel& forces,
                  const DynamicsState& state, double dt) {
  auto [mass, coriolis] = mass_and_coriolis(model, state);
  const VecX rhs = generalized_force(model, forces, state, dt) - coriolis;
  Eigen::LLT<MatX> llt(mass);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("singular generalized mass matrix");
  }
  return llt.solve(rhs);
}

}  // namespace

DynamicsState baseline_step(const KinematicModel& model, const DynamicsState& state,
                            const ForceModel& forces, double dt,
                            BaselineScheme scheme) {
  if (dt <= 0.0) throw ModelError("dt must be positive");
  auto deriv = [&](const DynamicsState& s) {
    return acceleration(model, forces, s, dt);
  };

  DynamicsState out;
  switch (scheme) {
    case BaselineScheme::forward_euler: {
      const VecX a = deriv(state);
      out.q = state.q + dt * state.qdot;
      out.qdot = state.qdot + dt * a;
      break;
    }
    case BaselineScheme::semi_implicit: {
      const VecX a = deriv(state);
      out.qdot = state.qdot + dt * a;
      out.q = state.q + dt * out.qdot;
      break;
    }
    case BaselineScheme::rk2: {
      const VecX a1 = deriv(state);
      DynamicsState mid{state.q + 0.5 * dt * state.qdot, state.qdot + 0.5 * dt * a1};
      const VecX a2 = deriv(mid);
      out.q = state.q + dt * mid.qdot;
      out.qdot = state.qdot + dt * a2;
      break;
    }
    case BaselineScheme::rk3: {
      const VecX a1 = deriv(state);
      DynamicsState s2{state.q + 0.5 * dt * state.qdot, state.qdot + 0.5 * dt * a1};
      const VecX a2 = deriv(s2);
      DynamicsState s3{state.q + dt * (2.0 * s2.qdot - state.qdot),
                       state.qdot + dt * (2.0 * a2 - a1)};
      const VecX a3 = deriv(s3);
      out.q = state.q + dt / 6.0 * (state.qdot + 4.0 * s2.qdot + s3.qdot);
      out.qdot = state.qdot + dt / 6.0 * (a1 + 4.0 * a2 + a3);
      break;
    }
    case BaselineScheme::rk4: {
      const VecX a1 = deriv(state);
      DynamicsState s2{state.q + 0.5 * dt * state.qdot, state.qdot + 0.5 * dt * a1};
      const VecX a2 = deriv(s2);
      DynamicsState s3{state.q + 0.5 * dt * s2.qdot, state.qdot + 0.5 * dt * a2};
      const VecX a3 = deriv(s3);
      DynamicsState s4{state.q + dt * s3.qdot, state.qdot + dt * a3};
      const VecX a4 = deriv(s4);
      out.q = state.q + dt / 6.0 * (state.qdot + 2.0 * s2.qdot + 2.0 * s3.qdot + s4.qdot);
      out.qdot = state.qdot + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      break;
    }
  }
  return out;
}

double kinetic_energy(const KinematicModel& model, const Configuration& q,
                      const VecX& qdot) {
  const ConfigPass pass = ConfigPass::make(model, q);
  const VelocityPass vel = velocity_pass(model, pass, qdot, false);
  double ke = 0.0;
  for (int i = 0; i < model.link_count(); ++i) {
    ke += 0.5 * ddot(vel.tdot[i] * model.body_integrals[i].S, vel.tdot[i]);
  }
  return ke;
}

double gravity_potential(const KinematicModel& model, const Vec3& gravity,
                         const Configuration& q) {
  const std::vector<Mat4> world = forward_pass(model, q);
  Vec4 ghat;
  ghat << gravity, 0.0;
  double pe = 0.0;
  for (int i = 0; i < model.link_count(); ++i) {
    pe -= ghat.dot(world[i] * (model.body_integrals[i].S * Vec4(0, 0, 0, 1)));
  }
  return pe;
}

}  // namespace pbad
