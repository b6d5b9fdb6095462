#include "pbad/adjoint.hpp"

#include <array>

#include "pbad/thread_pool.hpp"

namespace pbad {

ConfigPass ConfigPass::make(const KinematicModel& model, const Configuration& q) {
  ConfigPass pass;
  pass.jets = all_joint_jets(model, q);
  const int n = model.link_count();
  pass.world.resize(n);
  pass.parent_world.resize(n);
  pass.lever.resize(n);
  for (int i = 0; i < n; ++i) {
    const int p = model.parent(i);
    pass.parent_world[i] = (p >= 0) ? pass.world[p] : Mat4::Identity();
    pass.world[i] = pass.parent_world[i] * pass.jets[i].value;
    const int dof = model.dof_count(i);
    pass.lever[i].resize(dof);
    for (int j = 0; j < dof; ++j) {
      pass.lever[i][j] = pass.parent_world[i] * pass.jets[i].d1[j];
    }
  }
  return pass;
}

WeightedBody WeightedBody::make(const KinematicModel& model, const VecX& weights) {
  if (weights.size() != 0 && weights.size() != model.link_count()) {
    throw ModelError("weight_per_body length does not match link count");
  }
  WeightedBody wb;
  wb.S.resize(model.link_count());
  for (int i = 0; i < model.link_count(); ++i) {
    const double w = weights.size() ? weights[i] : 1.0;
    wb.S[i] = w * model.body_integrals[i].S;
    wb.weighted_mass += w * model.body_integrals[i].mass;
  }
  return wb;
}

double functional_value(const std::vector<Mat4>& seeds, const ConfigPass& pass) {
  double value = 0.0;
  for (size_t i = 0; i < seeds.size(); ++i) value += ddot(seeds[i], pass.world[i]);
  return value;
}

VecX functional_grad(const KinematicModel& model, const std::vector<Mat4>& seeds,
                     const ConfigPass& pass) {
  const int n = model.link_count();
  VecX grad = VecX::Zero(model.total_dofs);
  std::vector<Mat4> adj(n, Mat4::Zero());
  for (int i = n - 1; i >= 0; --i) {
    adj[i] += seeds[i];
    const int off = model.dof_offset(i);
    for (int j = 0; j < model.dof_count(i); ++j) {
      grad[off + j] += ddot(pass.lever[i][j], adj[i]);
    }
    const int p = model.parent(i);
    if (p >= 0) adj[p] += adj[i] * pass.jets[i].value.transpose();
  }
  return grad;
}

MatX functional_hess(const KinematicModel& model, const std::vector<Mat4>& seeds,
                     const ConfigPass& pass) {
  const int n = model.link_count();
  MatX hess = MatX::Zero(model.total_dofs, model.total_dofs);
  std::vector<Mat4> adj(n, Mat4::Zero());
  std::array<Mat4, 6> walk;
  for (int i = n - 1; i >= 0; --i) {
    adj[i] += seeds[i];
    const int off = model.dof_offset(i);
    const int dof = model.dof_count(i);
    // own-joint block from second derivatives of the local map
    for (int l = 0; l < dof; ++l) {
      for (int j = 0; j <= l; ++j) {
        const double h = ddot(pass.parent_world[i] * pass.jets[i].d2_at(j, l), adj[i]);
        hess(off + j, off + l) += h;
        if (j != l) hess(off + l, off + j) += h;
      }
    }
    // ancestor blocks: carry adj[i] * dT_j^T down the path to the root
    for (int j = 0; j < dof; ++j) walk[j] = adj[i] * pass.jets[i].d1[j].transpose();
    for (int l = model.parent(i); l >= 0; l = model.parent(l)) {
      const int offl = model.dof_offset(l);
      for (int k = 0; k < model.dof_count(l); ++k) {
        for (int j = 0; j < dof; ++j) {
          const double h = ddot(pass.lever[l][k], walk[j]);
          hess(offl + k, off + j) += h;
          hess(off + j, offl + k) += h;
        }
      }
      for (int j = 0; j < dof; ++j) walk[j] = walk[j] * pass.jets[l].value.transpose();
    }
    const int p = model.parent(i);
    if (p >= 0) adj[p] += adj[i] * pass.jets[i].value.transpose();
  }
  return hess;
}

namespace {

std::vector<Mat4> correlation_seeds(const WeightedBody& wb, const ConfigPass& pass_a) {
  std::vector<Mat4> seeds(wb.S.size());
  for (size_t i = 0; i < wb.S.size(); ++i) seeds[i] = pass_a.world[i] * wb.S[i];
  return seeds;
}

}  // namespace

double correlation_value(const KinematicModel& model, const WeightedBody& wb,
                         const ConfigPass& pass_a, const ConfigPass& pass_b) {
  double value = 0.0;
  for (int i = 0; i < model.link_count(); ++i) {
    value += ddot(pass_a.world[i] * wb.S[i], pass_b.world[i]);
  }
  return value - wb.weighted_mass;
}

VecX correlation_grad_b(const KinematicModel& model, const WeightedBody& wb,
                        const ConfigPass& pass_a, const ConfigPass& pass_b) {
  return functional_grad(model, correlation_seeds(wb, pass_a), pass_b);
}

MatX correlation_hess_bb(const KinematicModel& model, const WeightedBody& wb,
                         const ConfigPass& pass_a, const ConfigPass& pass_b) {
  return functional_hess(model, correlation_seeds(wb, pass_a), pass_b);
}

MatX correlation_hess_ab(const KinematicModel& model, const WeightedBody& wb,
                         const ConfigPass& pass_a, const ConfigPass& pass_b) {
  const int n = model.link_count();
  MatX hess = MatX::Zero(model.total_dofs, model.total_dofs);
  // acc[i] accumulates, over the subtree of i,
  //   T_i^m(qb) * S_m * T_i^m(qa)^T,
  // the subtree correlation seen from link i's local frames.
  std::vector<Mat4> acc(n, Mat4::Zero());
  for (int i = n - 1; i >= 0; --i) {
    acc[i] += wb.S[i];
    const int off = model.dof_offset(i);
    const int dof = model.dof_count(i);
    // both derivatives on link i
    for (int j = 0; j < dof; ++j) {
      const Mat4 ua = pass_a.lever[i][j].transpose();
      for (int k = 0; k < dof; ++k) {
        hess(off + j, off + k) += (ua * pass_b.lever[i][k] * acc[i]).trace();
      }
    }
    // one derivative on link i, the other on an ancestor l:
    //   fwd = T_l^i(qb) * acc   handles (qa on i, qb on l),
    //   bwd = acc * T_l^i(qa)^T handles (qa on l, qb on i).
    Mat4 fwd = pass_b.jets[i].value * acc[i];
    Mat4 bwd = acc[i] * pass_a.jets[i].value.transpose();
    for (int l = model.parent(i); l >= 0; l = model.parent(l)) {
      const int offl = model.dof_offset(l);
      for (int j = 0; j < dof; ++j) {
        const Mat4 ua = pass_a.lever[i][j].transpose();
        const Mat4 vb = pass_b.lever[i][j];
        for (int k = 0; k < model.dof_count(l); ++k) {
          hess(off + j, offl + k) += (ua * pass_b.lever[l][k] * fwd).trace();
          hess(offl + k, off + j) +=
              (pass_a.lever[l][k].transpose() * vb * bwd).trace();
        }
      }
      fwd = pass_b.jets[l].value * fwd;
      bwd = bwd * pass_a.jets[l].value.transpose();
    }
    const int p = model.parent(i);
    if (p >= 0) {
      acc[p] += pass_b.jets[i].value * acc[i] * pass_a.jets[i].value.transpose();
    }
  }
  return hess;
}

std::pair<double, VecX> correlation_and_grad(const CorrelationRequest& req) {
  const KinematicModel& model = *req.model;
  const auto wb = WeightedBody::make(model, req.weight_per_body);
  const auto pa = ConfigPass::make(model, req.qa);
  const auto pb = ConfigPass::make(model, req.qb);
  return {correlation_value(model, wb, pa, pb), correlation_grad_b(model, wb, pa, pb)};
}

MatX hessian_bb(const CorrelationRequest& req) {
  const KinematicModel& model = *req.model;
  const auto wb = WeightedBody::make(model, req.weight_per_body);
  const auto pa = ConfigPass::make(model, req.qa);
  const auto pb = ConfigPass::make(model, req.qb);
  return correlation_hess_bb(model, wb, pa, pb);
}

MatX hessian_ab(const CorrelationRequest& req) {
  const KinematicModel& model = *req.model;
  const auto wb = WeightedBody::make(model, req.weight_per_body);
  const auto pa = ConfigPass::make(model, req.qa);
  const auto pb = ConfigPass::make(model, req.qb);
  return correlation_hess_ab(model, wb, pa, pb);
}

namespace {

// Replays the serial subtree accumulation restricted to the subtree of
// root_link, visiting links in the same (descending) order as the serial
// backward pass so each work item's result is bit-identical to the
// serial adjoint. The scratch vector is freshly zeroed per item.
Mat4 subtree_adjoint(const KinematicModel& model, const std::vector<Mat4>& seeds,
                     const ConfigPass& pass_b, int root_link,
                     const std::vector<char>& descendant) {
  std::vector<Mat4> scratch(model.link_count() - root_link, Mat4::Zero());
  for (int m = model.link_count() - 1; m >= root_link; --m) {
    if (!descendant[m]) continue;
    scratch[m - root_link] += seeds[m];
    if (m != root_link) {
      scratch[model.parent(m) - root_link] +=
          scratch[m - root_link] * pass_b.jets[m].value.transpose();
    }
  }
  return scratch[0];
}

Mat4 subtree_correlation(const KinematicModel& model, const WeightedBody& wb,
                         const ConfigPass& pass_a, const ConfigPass& pass_b,
                         int root_link, const std::vector<char>& descendant) {
  std::vector<Mat4> scratch(model.link_count() - root_link, Mat4::Zero());
  for (int m = model.link_count() - 1; m >= root_link; --m) {
    if (!descendant[m]) continue;
    scratch[m - root_link] += wb.S[m];
    if (m != root_link) {
      scratch[model.parent(m) - root_link] += pass_b.jets[m].value *
                                              scratch[m - root_link] *
                                              pass_a.jets[m].value.transpose();
    }
  }
  return scratch[0];
}

}  // namespace

CorrelationDerivatives parallel_correlation_suite(const CorrelationRequest& req,
                                                  int workers) {
  if (workers < 1) throw ModelError("worker count must be >= 1");
  const KinematicModel& model = *req.model;
  const int n = model.link_count();
  const int dofs = model.total_dofs;
  const auto wb = WeightedBody::make(model, req.weight_per_body);
  const auto pa = ConfigPass::make(model, req.qa);
  const auto pb = ConfigPass::make(model, req.qb);
  const auto seeds = correlation_seeds(wb, pa);

  std::vector<std::vector<char>> in_subtree(n, std::vector<char>(n, 0));
  for (int m = 0; m < n; ++m) {
    for (int a = m; a >= 0; a = model.parent(a)) in_subtree[a][m] = 1;
  }

  CorrelationDerivatives out;
  out.grad_b = VecX::Zero(dofs);
  out.hess_bb = MatX::Zero(dofs, dofs);
  out.hess_ab = MatX::Zero(dofs, dofs);
  std::vector<double> value_slots(n, 0.0);

  // One work item per (link, quantity). Every item writes a disjoint set
  // of output entries, so no synchronization is needed beyond the pool's
  // round barrier.
  constexpr int kTasksPerLink = 3;
  const std::function<void(int)> item = [&](int task) {
    const int i = task / kTasksPerLink;
    const int kind = task % kTasksPerLink;
    const int off = model.dof_offset(i);
    const int dof = model.dof_count(i);

    if (kind == 0) {
      value_slots[i] = ddot(seeds[i], pb.world[i]);
      const Mat4 adj = subtree_adjoint(model, seeds, pb, i, in_subtree[i]);
      for (int j = 0; j < dof; ++j) {
        out.grad_b[off + j] = ddot(pb.lever[i][j], adj);
      }
    } else if (kind == 1) {
      const Mat4 adj = subtree_adjoint(model, seeds, pb, i, in_subtree[i]);
      for (int l = 0; l < dof; ++l) {
        for (int j = 0; j <= l; ++j) {
          const double h = ddot(pb.parent_world[i] * pb.jets[i].d2_at(j, l), adj);
          out.hess_bb(off + j, off + l) += h;
          if (j != l) out.hess_bb(off + l, off + j) += h;
        }
      }
      std::array<Mat4, 6> walk;
      for (int j = 0; j < dof; ++j) walk[j] = adj * pb.jets[i].d1[j].transpose();
      for (int l = model.parent(i); l >= 0; l = model.parent(l)) {
        const int offl = model.dof_offset(l);
        for (int k = 0; k < model.dof_count(l); ++k) {
          for (int j = 0; j < dof; ++j) {
            const double h = ddot(pb.lever[l][k], walk[j]);
            out.hess_bb(offl + k, off + j) += h;
            out.hess_bb(off + j, offl + k) += h;
          }
        }
        for (int j = 0; j < dof; ++j) walk[j] = walk[j] * pb.jets[l].value.transpose();
      }
    } else {
      const Mat4 acc = subtree_correlation(model, wb, pa, pb, i, in_subtree[i]);
      for (int j = 0; j < dof; ++j) {
        const Mat4 ua = pa.lever[i][j].transpose();
        for (int k = 0; k < dof; ++k) {
          out.hess_ab(off + j, off + k) += (ua * pb.lever[i][k] * acc).trace();
        }
      }
      Mat4 fwd = pb.jets[i].value * acc;
      Mat4 bwd = acc * pa.jets[i].value.transpose();
      for (int l = model.parent(i); l >= 0; l = model.parent(l)) {
        const int offl = model.dof_offset(l);
        for (int j = 0; j < dof; ++j) {
          const Mat4 ua = pa.lever[i][j].transpose();
          const Mat4 vb = pb.lever[i][j];
          for (int k = 0; k < model.dof_count(l); ++k) {
            out.hess_ab(off + j, offl + k) += (ua * pb.lever[l][k] * fwd).trace();
            out.hess_ab(offl + k, off + j) +=
                (pa.lever[l][k].transpose() * vb * bwd).trace();
          }
        }
        fwd = pb.jets[l].value * fwd;
        bwd = bwd * pa.jets[l].value.transpose();
      }
    }
  };

  WorkerPool pool(workers);
  pool.run(n * kTasksPerLink, item);

  // Ordered reduction keeps the value identical to the serial forward pass.
  double value = 0.0;
  for (int i = 0; i < n; ++i) value += value_slots[i];
  out.value = value - wb.weighted_mass;
  return out;
}

}  // namespace pbad
