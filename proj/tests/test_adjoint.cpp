#include <doctest.h>

#include "pbad/adjoint.hpp"
#include "test_helpers.hpp"

using namespace pbad;
using namespace pbad::testing;

namespace {

// Forward-mode differentiation oracle, independent of the backward
// adjoint passes: carries dT^m/dq_j through the chain recursion.
struct ForwardModeOracle {
  const KinematicModel& model;
  VecX q;
  std::vector<JointJet> jets;
  std::vector<Mat4> world;

  ForwardModeOracle(const KinematicModel& m, const VecX& q_in) : model(m), q(q_in) {
    jets = all_joint_jets(model, q);
    world.resize(model.link_count());
    for (int i = 0; i < model.link_count(); ++i) {
      const int p = model.parent(i);
      world[i] = p >= 0 ? Mat4(world[p] * jets[i].value) : jets[i].value;
    }
  }

  int owner_link(int dof) const {
    for (int i = 0; i < model.link_count(); ++i) {
      if (dof >= model.dof_offset(i) && dof < model.dof_offset(i) + model.dof_count(i))
        return i;
    }
    return -1;
  }

  // dT^m/dq_dof for all m
  std::vector<Mat4> dT(int dof) const {
    const int l = owner_link(dof);
    const int local = dof - model.dof_offset(l);
    std::vector<Mat4> d(model.link_count(), Mat4::Zero());
    for (int m = 0; m < model.link_count(); ++m) {
      const int p = model.parent(m);
      const Mat4 parent_world = p >= 0 ? world[p] : Mat4::Identity();
      const Mat4 parent_d = p >= 0 ? d[p] : Mat4::Zero();
      d[m] = parent_d * jets[m].value;
      if (m == l) d[m] += parent_world * jets[m].d1[local];
    }
    return d;
  }

  // d2T^m/dq_a dq_b for all m
  std::vector<Mat4> d2T(int dof_a, int dof_b) const {
    const int la = owner_link(dof_a), lb = owner_link(dof_b);
    const int ja = dof_a - model.dof_offset(la), jb = dof_b - model.dof_offset(lb);
    const auto da = dT(dof_a);
    const auto db = dT(dof_b);
    std::vector<Mat4> d2(model.link_count(), Mat4::Zero());
    for (int m = 0; m < model.link_count(); ++m) {
      const int p = model.parent(m);
      const Mat4 parent_world = p >= 0 ? world[p] : Mat4::Identity();
      const Mat4 parent_da = p >= 0 ? da[p] : Mat4::Zero();
      const Mat4 parent_db = p >= 0 ? db[p] : Mat4::Zero();
      const Mat4 parent_d2 = p >= 0 ? d2[p] : Mat4::Zero();
      d2[m] = parent_d2 * jets[m].value;
      if (m == la) d2[m] += parent_db * jets[m].d1[ja];
      if (m == lb) d2[m] += parent_da * jets[m].d1[jb];
      if (m == la && m == lb) d2[m] += parent_world * jets[m].d2_at(ja, jb);
    }
    return d2;
  }
};

VecX oracle_grad_b(const KinematicModel& model, const VecX& qa, const VecX& qb) {
  ForwardModeOracle a(model, qa), b(model, qb);
  VecX grad = VecX::Zero(model.total_dofs);
  for (int j = 0; j < model.total_dofs; ++j) {
    const auto db = b.dT(j);
    for (int m = 0; m < model.link_count(); ++m) {
      grad[j] += ddot(a.world[m] * model.body_integrals[m].S, db[m]);
    }
  }
  return grad;
}

MatX oracle_hess_bb(const KinematicModel& model, const VecX& qa, const VecX& qb) {
  ForwardModeOracle a(model, qa), b(model, qb);
  const int n = model.total_dofs;
  MatX hess(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const auto d2 = b.d2T(j, k);
      double h = 0.0;
      for (int m = 0; m < model.link_count(); ++m) {
        h += ddot(a.world[m] * model.body_integrals[m].S, d2[m]);
      }
      hess(j, k) = h;
    }
  }
  return hess;
}

MatX oracle_hess_ab(const KinematicModel& model, const VecX& qa, const VecX& qb) {
  ForwardModeOracle a(model, qa), b(model, qb);
  const int n = model.total_dofs;
  MatX hess(n, n);
  for (int j = 0; j < n; ++j) {
    const auto da = a.dT(j);
    for (int k = 0; k < n; ++k) {
      const auto db = b.dT(k);
      double h = 0.0;
      for (int m = 0; m < model.link_count(); ++m) {
        h += ddot(da[m] * model.body_integrals[m].S, db[m]);
      }
      hess(j, k) = h;
    }
  }
  return hess;
}

KinematicModel single_unit_cube() {
  LinkSpec link;
  link.parent = std::nullopt;
  link.joint.kind = JointKind::hinge;
  link.joint.axis = Vec3::UnitZ();
  BoxGeometry box;
  box.size = Vec3::Ones();
  box.density = 1.0;
  box.center = Vec3::Zero();
  link.geometry = box;
  return build_model({link});
}

}  // namespace

TEST_CASE("correlation value of a resting unit cube is 1/4") {
  const KinematicModel model = single_unit_cube();
  CorrelationRequest req{&model, VecX::Zero(1), VecX::Zero(1), VecX()};
  const auto [value, grad] = correlation_and_grad(req);
  CHECK(value == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(grad.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("correlation value matches the naive direct sum") {
  std::mt19937 rng(21);
  const KinematicModel model = random_tree(rng, 10, true);
  const VecX qa = random_vec(rng, model.total_dofs);
  const VecX qb = random_vec(rng, model.total_dofs);
  CorrelationRequest req{&model, qa, qb, VecX()};
  const double value = correlation_and_grad(req).first;
  const double naive = naive_correlation(model, qa, qb);
  CHECK(std::abs(value - naive) < 1e-12 * std::max(1.0, std::abs(naive)));
}

TEST_CASE("correlation symmetry I(qa,qb) == I(qb,qa)") {
  std::mt19937 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const KinematicModel model = random_tree(rng, 8);
    const VecX qa = random_vec(rng, model.total_dofs);
    const VecX qb = random_vec(rng, model.total_dofs);
    CorrelationRequest fwd{&model, qa, qb, VecX()};
    CorrelationRequest rev{&model, qb, qa, VecX()};
    const double a = correlation_and_grad(fwd).first;
    const double b = correlation_and_grad(rev).first;
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("gradient matches finite differences on a hinge chain") {
  const KinematicModel model = planar_chain(6);
  std::mt19937 rng(23);
  const VecX q = random_vec(rng, 6);
  CorrelationRequest req{&model, q, q, VecX()};
  const VecX grad = correlation_and_grad(req).second;
  const VecX fd = fd_gradient(
      [&](const VecX& qb) {
        CorrelationRequest r{&model, q, qb, VecX()};
        return naive_correlation(model, q, qb);
      },
      q);
  CHECK(rel_err(grad, fd) < 1e-6);
}

TEST_CASE("adjoint outputs equal the forward-mode oracle on small trees") {
  std::mt19937 rng(24);
  for (int trial = 0; trial < 12; ++trial) {
    const KinematicModel model = random_tree(rng, 5);
    const VecX qa = random_vec(rng, model.total_dofs);
    const VecX qb = random_vec(rng, model.total_dofs);
    CorrelationRequest req{&model, qa, qb, VecX()};

    const VecX grad = correlation_and_grad(req).second;
    CHECK(rel_err(grad, oracle_grad_b(model, qa, qb)) < 1e-10);

    const MatX bb = hessian_bb(req);
    CHECK(rel_err(bb, oracle_hess_bb(model, qa, qb)) < 1e-10);
    CHECK(rel_err(bb, MatX(bb.transpose())) < 1e-10);

    const MatX ab = hessian_ab(req);
    CHECK(rel_err(ab, oracle_hess_ab(model, qa, qb)) < 1e-10);
  }
}

TEST_CASE("single-hinge unit cube second derivatives") {
  // 1-DOF closed form from f(t) = tr(R(t)^T R(0) Sigma): the mixed
  // derivative is Sxx+Syy = 1/6 and the repeated-slot derivative is
  // -(Sxx+Syy) = -1/6, both pinned here by central differences of the
  // analytic 1-DOF trace function.
  const KinematicModel model = single_unit_cube();
  auto f = [&](double ta, double tb) { return naive_correlation(model, VecX::Constant(1, ta), VecX::Constant(1, tb)); };
  const double h = 1e-5;
  const double fd_bb = (f(0, h) - 2 * f(0, 0) + f(0, -h)) / (h * h);
  const double fd_ab =
      (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h);
  CHECK(fd_bb == doctest::Approx(-1.0 / 6.0).epsilon(1e-4));
  CHECK(fd_ab == doctest::Approx(1.0 / 6.0).epsilon(1e-4));

  CorrelationRequest req{&model, VecX::Zero(1), VecX::Zero(1), VecX()};
  CHECK(hessian_bb(req)(0, 0) == doctest::Approx(-1.0 / 6.0).epsilon(1e-12));
  CHECK(hessian_ab(req)(0, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("hessians match finite differences of the gradient") {
  std::mt19937 rng(25);
  const KinematicModel model = random_tree(rng, 5, true);
  const VecX qa = random_vec(rng, model.total_dofs);
  const VecX qb = random_vec(rng, model.total_dofs);
  CorrelationRequest req{&model, qa, qb, VecX()};

  const MatX fd_bb = fd_jacobian(
      [&](const VecX& q) {
        CorrelationRequest r{&model, qa, q, VecX()};
        return correlation_and_grad(r).second;
      },
      qb);
  CHECK(rel_err(hessian_bb(req), fd_bb) < 1e-5);

  const MatX fd_ab_t = fd_jacobian(
      [&](const VecX& q) {
        CorrelationRequest r{&model, q, qb, VecX()};
        return correlation_and_grad(r).second;
      },
      qa);
  // columns of fd_ab_t differentiate qa_j: entry (k, j); hess_ab is (j, k)
  CHECK(rel_err(hessian_ab(req), MatX(fd_ab_t.transpose())) < 1e-5);
}

TEST_CASE("hess_bb block sparsity on a two-branch tree") {
  // root(0) -> 1 -> 2 and root -> 3 -> 4: dofs in the separate branches
  // share no descendant body
  std::vector<LinkSpec> specs;
  auto make = [&](std::optional<int> parent, const Vec3& axis) {
    LinkSpec l;
    l.parent = parent;
    l.joint.kind = JointKind::hinge;
    l.joint.axis = axis;
    l.joint.offset = Mat4::Identity();
    l.joint.offset(0, 3) = 0.7;
    BoxGeometry box;
    box.size = Vec3(0.4, 0.2, 0.2);
    box.density = 500.0;
    box.center = Vec3(0.2, 0, 0);
    l.geometry = box;
    return l;
  };
  specs.push_back(make(std::nullopt, Vec3::UnitZ()));
  specs.push_back(make(0, Vec3::UnitY()));
  specs.push_back(make(1, Vec3::UnitZ()));
  specs.push_back(make(0, Vec3::UnitX()));
  specs.push_back(make(3, Vec3::UnitY()));
  const KinematicModel model = build_model(std::move(specs));
  std::mt19937 rng(26);
  const VecX qa = random_vec(rng, 5), qb = random_vec(rng, 5);
  CorrelationRequest req{&model, qa, qb, VecX()};
  const MatX bb = hessian_bb(req);
  const MatX ab = hessian_ab(req);
  // branch dofs: {1,2} and {3,4} have no common descendant
  for (int j : {1, 2}) {
    for (int k : {3, 4}) {
      CHECK(bb(j, k) == 0.0);
      CHECK(bb(k, j) == 0.0);
      CHECK(ab(j, k) == 0.0);
      CHECK(ab(k, j) == 0.0);
    }
  }
}

TEST_CASE("hess_ab at qa == qb is positive semidefinite") {
  std::mt19937 rng(27);
  for (int trial = 0; trial < 10; ++trial) {
    const KinematicModel model = random_tree(rng, 7);
    const VecX q = random_vec(rng, model.total_dofs);
    CorrelationRequest req{&model, q, q, VecX()};
    const MatX ab = hessian_ab(req);
    CHECK(rel_err(ab, MatX(ab.transpose())) < 1e-10);
    Eigen::SelfAdjointEigenSolver<MatX> eig(0.5 * (ab + ab.transpose()));
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * ab.norm());
  }
}

TEST_CASE("per-body weights scale the correlation") {
  std::mt19937 rng(28);
  const KinematicModel model = random_tree(rng, 6, true);
  const VecX qa = random_vec(rng, model.total_dofs);
  const VecX qb = random_vec(rng, model.total_dofs);
  VecX weights = random_vec(rng, model.link_count(), 0.2, 2.0);
  CorrelationRequest req{&model, qa, qb, weights};
  const double value = correlation_and_grad(req).first;
  const auto ta = forward_pass(model, qa);
  const auto tb = forward_pass(model, qb);
  double expected = 0.0;
  for (int i = 0; i < model.link_count(); ++i) {
    expected += weights[i] *
                ((ta[i].transpose() * tb[i] * model.body_integrals[i].S).trace() -
                 model.body_integrals[i].mass);
  }
  CHECK(std::abs(value - expected) < 1e-11 * std::max(1.0, std::abs(expected)));
}

TEST_CASE("parallel suite equals the serial operations") {
  std::mt19937 rng(29);
  SUBCASE("workers=1 on a random tree") {
    const KinematicModel model = random_tree(rng, 9);
    const VecX qa = random_vec(rng, model.total_dofs);
    const VecX qb = random_vec(rng, model.total_dofs);
    CorrelationRequest req{&model, qa, qb, VecX()};
    const auto par = parallel_correlation_suite(req, 1);
    const auto [value, grad] = correlation_and_grad(req);
    CHECK(std::abs(par.value - value) <= 1e-12);
    CHECK((par.grad_b - grad).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((par.hess_bb - hessian_bb(req)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((par.hess_ab - hessian_ab(req)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("workers=8 on a 40-link chain") {
    const KinematicModel model = random_tree(rng, 40, true);
    const VecX qa = random_vec(rng, model.total_dofs);
    const VecX qb = random_vec(rng, model.total_dofs);
    CorrelationRequest req{&model, qa, qb, VecX()};
    const auto par = parallel_correlation_suite(req, 8);
    const auto [value, grad] = correlation_and_grad(req);
    CHECK(std::abs(par.value - value) <= 1e-12);
    CHECK((par.grad_b - grad).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((par.hess_bb - hessian_bb(req)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((par.hess_ab - hessian_ab(req)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("repeated runs agree") {
    const KinematicModel model = random_tree(rng, 16);
    const VecX qa = random_vec(rng, model.total_dofs);
    const VecX qb = random_vec(rng, model.total_dofs);
    CorrelationRequest req{&model, qa, qb, VecX()};
    const auto first = parallel_correlation_suite(req, 8);
    for (int rep = 0; rep < 3; ++rep) {
      const auto again = parallel_correlation_suite(req, 8);
      CHECK(std::abs(again.value - first.value) <= 1e-12);
      CHECK((again.grad_b - first.grad_b).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}
