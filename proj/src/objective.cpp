#include "pbad/objective.hpp"

#include <cmath>

namespace pbad {

namespace {

Vec4 homogeneous(const Vec3& v, double w) {
  Vec4 h;
  h << v, w;
  return h;
}

struct PotentialFlags {
  bool grad = false;
  bool gn = false;
  bool hess = false;
};

// Gravity, drag and contact terms of one configuration. pass_next must be
// a full pass of q_next; of q_prev only the world transforms are used.
// hess_ab_next, when provided, is the mixed correlation Hessian at
// (q_next, q_next) and saves recomputing it for the drag terms.
PotentialEval potential_terms(const KinematicModel& model, const ForceModel& forces,
                              const ConfigPass& pass_next,
                              const std::vector<Mat4>& world_prev, double dt,
                              PotentialFlags flags, const MatX* hess_ab_next) {
  const int n = model.link_count();
  const int dofs = model.total_dofs;
  PotentialEval out;
  out.grad = VecX::Zero(dofs);
  if (flags.gn) out.gn = MatX::Zero(dofs, dofs);
  if (flags.hess) out.hess = MatX::Zero(dofs, dofs);

  const bool needs_ab = (flags.gn || flags.hess) && forces.drag_d > 0.0;
  MatX ab_local;
  const MatX* ab = hess_ab_next;
  if (needs_ab && ab == nullptr) {
    WeightedBody wb = WeightedBody::make(model, VecX());
    ab_local = correlation_hess_ab(model, wb, pass_next, pass_next);
    ab = &ab_local;
  }

  std::vector<Mat4> cot(n, Mat4::Zero());  // cotangent seeds dQ/dT per body
  bool have_cot = false;

  // gravity: Q = -g . sum_i (T^i S_i e4)
  if (!forces.gravity.isZero()) {
    const Vec4 ghat = homogeneous(forces.gravity, 0.0);
    for (int i = 0; i < n; ++i) {
      const Vec4 u = model.body_integrals[i].S * Vec4(0, 0, 0, 1);
      const Mat4 c = -ghat * u.transpose();
      out.value += ddot(c, pass_next.world[i]);
      cot[i] += c;
    }
    have_cot = true;
  }

  // drag: (D/dt^2) * integral of rho |P(q_next) - P(q_prev)|^2
  if (forces.drag_d > 0.0) {
    const double scale = forces.drag_d / (dt * dt);
    for (int i = 0; i < n; ++i) {
      const Mat4 diff = pass_next.world[i] - world_prev[i];
      const Mat4 diff_s = diff * model.body_integrals[i].S;
      out.value += scale * ddot(diff_s, diff);
      cot[i] += (2.0 * scale) * diff_s;
    }
    have_cot = true;
    if (flags.gn) out.gn += (2.0 * scale) * (*ab);
    if (flags.hess) out.hess += (2.0 * scale) * (*ab);
  }

  // contact: per-sample penalty per the ground-plane model
  if (forces.contact && (forces.contact->d1 > 0.0 || forces.contact->d2 > 0.0)) {
    const ContactModel& cm = *forces.contact;
    const Vec3& nrm = cm.plane_normal;
    const Mat3 proj = Mat3::Identity() - nrm * nrm.transpose();
    MatX jx;  // 3 x dofs sample Jacobian, built on demand
    const bool need_jx = flags.gn || flags.hess;
    for (int i = 0; i < n; ++i) {
      for (const Vec3& sample : model.links[i].contact_samples) {
        const Vec4 ph = homogeneous(sample, 1.0);
        const Vec3 x = (pass_next.world[i] * ph).head<3>();
        const double depth = cm.plane_offset - nrm.dot(x);
        if (depth <= 0.0) continue;
        const Vec3 x_prev = (world_prev[i] * ph).head<3>();
        const Vec3 v = (x - x_prev) / dt;
        const Vec3 pv = proj * v;
        const double pv2 = pv.squaredNorm();
        out.value += cm.d1 * depth * depth + cm.d2 * depth * depth * pv2;

        const Vec3 dqdx = (-2.0 * cm.d1 * depth - 2.0 * cm.d2 * depth * pv2) * nrm +
                          (2.0 * cm.d2 * depth * depth / dt) * pv;
        cot[i] += homogeneous(dqdx, 0.0) * ph.transpose();
        have_cot = true;

        if (need_jx) {
          jx = MatX::Zero(3, dofs);
          Vec4 y = ph;
          for (int l = i; l >= 0; l = model.parent(l)) {
            const int off = model.dof_offset(l);
            for (int j = 0; j < model.dof_count(l); ++j) {
              jx.col(off + j) = (pass_next.lever[l][j] * y).head<3>();
            }
            y = pass_next.jets[l].value * y;
          }
          const VecX ddepth_dq = -(nrm.transpose() * jx).transpose();
          if (flags.gn) {
            // residuals sqrt(d1)*depth and sqrt(d2)*depth*pv, each with the
            // 2 J^T J surrogate of its square
            out.gn += (2.0 * cm.d1) * ddepth_dq * ddepth_dq.transpose();
            if (cm.d2 > 0.0) {
              MatX jr = pv * ddepth_dq.transpose() + (depth / dt) * (proj * jx);
              out.gn += (2.0 * cm.d2) * jr.transpose() * jr;
            }
          }
          if (flags.hess) {
            Mat3 hxx = 2.0 * cm.d1 * nrm * nrm.transpose();
            if (cm.d2 > 0.0) {
              hxx += 2.0 * cm.d2 * pv2 * nrm * nrm.transpose() -
                     (4.0 * cm.d2 * depth / dt) *
                         (nrm * pv.transpose() + pv * nrm.transpose()) +
                     (2.0 * cm.d2 * depth * depth / (dt * dt)) * proj;
            }
            out.hess += jx.transpose() * hxx * jx;
          }
        }
      }
    }
  }

  if (have_cot) {
    if (flags.grad) out.grad = functional_grad(model, cot, pass_next);
    if (flags.hess) out.hess += functional_hess(model, cot, pass_next);
  }
  return out;
}

}  // namespace

PotentialEval eval_potentials(const KinematicModel& model, const ForceModel& forces,
                              const Configuration& q_next, const Configuration& q_prev,
                              double dt, bool want_gn, bool want_hess) {
  validate_configuration(model, q_next);
  validate_configuration(model, q_prev);
  const ConfigPass pass_next = ConfigPass::make(model, q_next);
  const std::vector<Mat4> world_prev = forward_pass(model, q_prev);
  PotentialFlags flags;
  flags.grad = true;
  flags.gn = want_gn;
  flags.hess = want_hess;
  return potential_terms(model, forces, pass_next, world_prev, dt, flags, nullptr);
}

struct StepObjective::Cache {
  WeightedBody wb;
  std::vector<ConfigPass> history;  // passes at times[0], times[1]
  double hist_const = 0.0;          // constant correlation terms, energy form
};

StepObjective::StepObjective(const StepProblem& problem) : problem_(problem) {
  const KinematicModel& model = *problem.model;
  if (problem.history.size() != 2) {
    throw ModelError("step problem must carry two history configurations");
  }
  if (problem.kind == ObjectiveKind::energy_form && problem.scheme->order != 2) {
    throw ModelError("the energy objective is only defined for order 2");
  }
  if (problem.dt <= 0.0) throw ModelError("step problem dt must be positive");
  validate_configuration(model, problem.history[0]);
  validate_configuration(model, problem.history[1]);
  cache_ = std::make_unique<Cache>();
  cache_->wb = WeightedBody::make(model, VecX());
  cache_->history.push_back(ConfigPass::make(model, problem.history[0]));
  cache_->history.push_back(ConfigPass::make(model, problem.history[1]));
  if (problem.kind == ObjectiveKind::energy_form) {
    const auto& prev2 = cache_->history[0];  // q_{k-1}
    const auto& prev1 = cache_->history[1];  // q_k
    cache_->hist_const =
        4.0 * correlation_value(model, cache_->wb, prev1, prev1) +
        correlation_value(model, cache_->wb, prev2, prev2) -
        4.0 * correlation_value(model, cache_->wb, prev1, prev2);
  }
}

StepObjective::~StepObjective() = default;

int StepObjective::dim() const {
  return problem_.model->total_dofs * problem_.scheme->unknown_count();
}

namespace {

VecX actuation_at(const StepProblem& p, int instant, int dofs) {
  if (instant < static_cast<int>(p.tau_at_instants.size()) &&
      p.tau_at_instants[instant].size() == dofs) {
    return p.tau_at_instants[instant];
  }
  if (p.forces.tau.size() == dofs) return p.forces.tau;
  return VecX::Zero(dofs);
}

}  // namespace

ObjectiveEval StepObjective::evaluate_impl(const VecX& x, bool want_grad,
                                           bool want_gn) const {
  const KinematicModel& model = *problem_.model;
  const CollocationScheme& scheme = *problem_.scheme;
  const int n = model.total_dofs;
  const double dt = problem_.dt;
  const double inv_dt2 = 1.0 / (dt * dt);
  ObjectiveEval out;

  if (problem_.kind == ObjectiveKind::energy_form) {
    if (x.size() != n) throw ModelError("energy objective expects one configuration");
    const ConfigPass pass = ConfigPass::make(model, x);
    const auto& wb = cache_->wb;
    const auto& prev2 = cache_->history[0];
    const auto& prev1 = cache_->history[1];

    const double inertial =
        0.5 * inv_dt2 *
        (correlation_value(model, wb, pass, pass) -
         4.0 * correlation_value(model, wb, prev1, pass) +
         2.0 * correlation_value(model, wb, prev2, pass) + cache_->hist_const);

    MatX ab;
    if (want_gn) ab = correlation_hess_ab(model, wb, pass, pass);

    PotentialFlags flags;
    flags.grad = want_grad;
    flags.gn = want_gn;
    const PotentialEval pot =
        potential_terms(model, problem_.forces, pass, prev1.world, dt, flags,
                        want_gn ? &ab : nullptr);

    const VecX tau = actuation_at(problem_, 0, n);
    out.value = inertial + pot.value - tau.dot(x);

    if (want_grad) {
      // combined inertial gradient: seeds (T+ - 2 T_k + T_{k-1}) S / dt^2
      std::vector<Mat4> seeds(model.link_count());
      for (int i = 0; i < model.link_count(); ++i) {
        seeds[i] = inv_dt2 *
                   (pass.world[i] - 2.0 * prev1.world[i] + prev2.world[i]) *
                   wb.S[i];
      }
      out.grad = functional_grad(model, seeds, pass) + pot.grad - tau;
    }
    if (want_gn) {
      MatX gn = inv_dt2 * ab + pot.gn;
      out.gn_matrix = 0.5 * (gn + gn.transpose());
    }
    return out;
  }

  // --- residual form ---
  const int unknowns = scheme.unknown_count();
  if (x.size() != static_cast<long>(n) * unknowns) {
    throw ModelError("residual objective expects " + std::to_string(unknowns) +
                     " stacked configurations");
  }
  const auto& wb = cache_->wb;

  std::vector<const ConfigPass*> window(scheme.point_count());
  window[0] = &cache_->history[0];
  window[1] = &cache_->history[1];
  std::vector<ConfigPass> unknown_passes;
  unknown_passes.reserve(unknowns);
  for (int m = 0; m < unknowns; ++m) {
    unknown_passes.push_back(ConfigPass::make(model, x.segment(m * n, n)));
    window[2 + m] = &unknown_passes.back();
  }

  std::vector<VecX> residuals(unknowns);
  MatX jac;
  if (want_grad) jac = MatX::Zero(n * unknowns, n * unknowns);

  for (int m = 0; m < unknowns; ++m) {
    const ConfigPass& pass_m = *window[2 + m];
    const VecX stencil = scheme.stencil(m);

    // combined generalized inertial force: one backward pass over the
    // stencil-weighted poses
    std::vector<Mat4> seeds(model.link_count());
    for (int i = 0; i < model.link_count(); ++i) {
      Mat4 acc = Mat4::Zero();
      for (int j = 0; j < scheme.point_count(); ++j) {
        acc += stencil[j] * window[j]->world[i];
      }
      seeds[i] = inv_dt2 * acc * wb.S[i];
    }
    VecX g = functional_grad(model, seeds, pass_m);

    MatX ab_mm;
    if (want_grad) ab_mm = correlation_hess_ab(model, wb, pass_m, pass_m);

    const double t_local = scheme.times[scheme.unknown_index(m)];
    PotentialFlags flags;
    flags.grad = true;
    flags.hess = want_grad;
    const PotentialEval pot =
        potential_terms(model, problem_.forces, pass_m, cache_->history[1].world,
                        t_local * dt, flags, want_grad ? &ab_mm : nullptr);
    g += pot.grad - actuation_at(problem_, m, n);
    residuals[m] = g;

    if (want_grad) {
      jac.block(m * n, m * n, n, n) =
          functional_hess(model, seeds, pass_m) +
          (inv_dt2 * stencil[scheme.unknown_index(m)]) * ab_mm.transpose() +
          pot.hess;
      for (int l = 0; l < unknowns; ++l) {
        if (l == m) continue;
        const MatX ab_lm = correlation_hess_ab(model, wb, *window[2 + l], pass_m);
        jac.block(m * n, l * n, n, n) =
            (inv_dt2 * stencil[scheme.unknown_index(l)]) * ab_lm.transpose();
      }
    }
  }

  out.value = 0.0;
  for (const auto& r : residuals) out.value += r.squaredNorm();
  if (want_grad) {
    VecX g_stacked(n * unknowns);
    for (int m = 0; m < unknowns; ++m) g_stacked.segment(m * n, n) = residuals[m];
    out.grad = 2.0 * jac.transpose() * g_stacked;
    if (want_gn) {
      MatX gn = 2.0 * jac.transpose() * jac;
      out.gn_matrix = 0.5 * (gn + gn.transpose());
    }
  }
  return out;
}

double StepObjective::value(const VecX& x) const {
  return evaluate_impl(x, false, false).value;
}

ObjectiveEval StepObjective::evaluate(const VecX& x, bool want_gn) const {
  return evaluate_impl(x, true, want_gn);
}

ObjectiveEval eval_energy_form(const StepProblem& problem, const Configuration& q_next,
                               bool want_gn) {
  if (problem.kind != ObjectiveKind::energy_form) {
    throw ModelError("eval_energy_form called with a residual-form problem");
  }
  StepObjective obj(problem);
  return obj.evaluate(q_next, want_gn);
}

ObjectiveEval eval_residual_form(const StepProblem& problem, const VecX& q_star,
                                 bool want_gn) {
  if (problem.kind != ObjectiveKind::residual_form) {
    throw ModelError("eval_residual_form called with an energy-form problem");
  }
  StepObjective obj(problem);
  return obj.evaluate(q_star, want_gn);
}

}  // namespace pbad
