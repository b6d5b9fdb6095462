#include <doctest.h>

#include "pbad/kinematics.hpp"
#include "test_helpers.hpp"

using namespace pbad;
using namespace pbad::testing;

namespace {

JointSpec hinge_z() {
  JointSpec j;
  j.kind = JointKind::hinge;
  j.axis = Vec3::UnitZ();
  return j;
}

// FD check of one jet at one local configuration.
void check_jet_fd(const JointSpec& joint, const VecX& q) {
  const JointJet jet = joint_jet(joint, q);
  for (int j = 0; j < joint.dof_count(); ++j) {
    VecX qp = q, qm = q;
    qp[j] += kFdStep;
    qm[j] -= kFdStep;
    const Mat4 fd1 =
        (joint_transform(joint, qp) - joint_transform(joint, qm)) / (2 * kFdStep);
    CHECK(rel_err(MatX(jet.d1[j]), MatX(fd1)) < 1e-6);
    const JointJet jp = joint_jet(joint, qp);
    const JointJet jm = joint_jet(joint, qm);
    for (int l = 0; l < joint.dof_count(); ++l) {
      const Mat4 fd2 = (jp.d1[l] - jm.d1[l]) / (2 * kFdStep);
      CHECK(rel_err(MatX(jet.d2_at(j, l)), MatX(fd2)) < 1e-6);
    }
  }
}

}  // namespace

TEST_CASE("hinge jet at zero is the rotation generator") {
  const JointJet jet = joint_jet(hinge_z(), VecX::Zero(1));
  CHECK((jet.value - Mat4::Identity()).cwiseAbs().maxCoeff() == 0.0);
  Mat4 gen = Mat4::Zero();
  gen(0, 1) = -1.0;
  gen(1, 0) = 1.0;
  CHECK((jet.d1[0] - gen).cwiseAbs().maxCoeff() < 1e-15);
  Mat4 gen2 = Mat4::Zero();
  gen2(0, 0) = -1.0;
  gen2(1, 1) = -1.0;
  CHECK((jet.d2_at(0, 0) - gen2).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("hinge jet at pi/2") {
  VecX q(1);
  q[0] = std::numbers::pi / 2.0;
  const JointJet jet = joint_jet(hinge_z(), q);
  CHECK(jet.value(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(jet.value(0, 1) == doctest::Approx(-1.0));
  CHECK(jet.value(1, 0) == doctest::Approx(1.0));
  check_jet_fd(hinge_z(), q);
}

TEST_CASE("ball joint jet against finite differences") {
  JointSpec ball;
  ball.kind = JointKind::ball;
  VecX q(3);
  q << 0.3, -0.2, 0.1;
  const JointJet jet = joint_jet(ball, q);
  CHECK((jet.value.topLeftCorner<3, 3>() -
         rotation_vector_matrix(Vec3(0.3, -0.2, 0.1)))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  check_jet_fd(ball, q);
}

TEST_CASE("random jets match finite differences for every joint kind") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    JointSpec hinge = hinge_z();
    Vec3 axis = Vec3(random_vec(rng, 3));
    if (axis.norm() < 1e-3) axis = Vec3::UnitX();
    hinge.axis = axis.normalized();
    hinge.offset = random_offset(rng);
    check_jet_fd(hinge, random_vec(rng, 1, -2.5, 2.5));

    JointSpec ball;
    ball.kind = JointKind::ball;
    ball.offset = random_offset(rng);
    check_jet_fd(ball, random_vec(rng, 3, -1.2, 1.2));

    JointSpec free;
    free.kind = JointKind::free_joint;
    free.offset = random_offset(rng);
    check_jet_fd(free, random_vec(rng, 6, -1.2, 1.2));
  }
}

TEST_CASE("ball joint is continuous across the small-angle switch") {
  JointSpec ball;
  ball.kind = JointKind::ball;
  const Vec3 dir = Vec3(1, 2, -0.5).normalized();
  const double threshold = 1e-4;
  VecX below(3), above(3);
  below = (threshold - 1e-9) * dir;
  above = (threshold + 1e-9) * dir;
  const JointJet ja = joint_jet(ball, below);
  const JointJet jb = joint_jet(ball, above);
  CHECK((ja.value - jb.value).cwiseAbs().maxCoeff() < 1e-8);
  for (int j = 0; j < 3; ++j) {
    CHECK((ja.d1[j] - jb.d1[j]).cwiseAbs().maxCoeff() < 1e-8);
    for (int l = j; l < 3; ++l) {
      CHECK((ja.d2_at(j, l) - jb.d2_at(j, l)).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("forward pass") {
  SUBCASE("zero configuration composes the fixed offsets") {
    std::mt19937 rng(3);
    const KinematicModel model = random_tree(rng, 8);
    const auto world = forward_pass(model, VecX::Zero(model.total_dofs));
    for (int i = 0; i < model.link_count(); ++i) {
      const int p = model.parent(i);
      const Mat4 expected =
          (p >= 0 ? Mat4(world[p] * model.links[i].joint.offset)
                  : model.links[i].joint.offset);
      CHECK((world[i] - expected).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
  SUBCASE("two-link planar chain lands at (1,1,0)") {
    const KinematicModel model = planar_chain(2);
    VecX q(2);
    q << std::numbers::pi / 2.0, -std::numbers::pi / 2.0;
    const auto world = forward_pass(model, q);
    const Vec3 origin = world[1].topRightCorner<3, 1>();
    CHECK(origin.x() == doctest::Approx(1.0));
    CHECK(origin.y() == doctest::Approx(1.0));
    CHECK(origin.z() == doctest::Approx(0.0));
    CHECK((world[1].topLeftCorner<3, 3>() - Mat3::Identity()).cwiseAbs().maxCoeff() <
          1e-14);
  }
  SUBCASE("composition identity holds exactly") {
    std::mt19937 rng(9);
    const KinematicModel model = random_tree(rng, 12);
    const VecX q = random_vec(rng, model.total_dofs);
    const auto world = forward_pass(model, q);
    for (int i = 0; i < model.link_count(); ++i) {
      const Mat4 local = joint_transform(
          model.links[i].joint, q.segment(model.dof_offset(i), model.dof_count(i)));
      const int p = model.parent(i);
      const Mat4 expected = p >= 0 ? Mat4(world[p] * local) : local;
      CHECK((world[i] - expected).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("rotations stay orthonormal for large q") {
    std::mt19937 rng(5);
    const KinematicModel model = random_tree(rng, 30, true);
    const VecX q = random_vec(rng, model.total_dofs, -10.0, 10.0);
    for (const Mat4& t : forward_pass(model, q)) {
      const Mat3 r = t.topLeftCorner<3, 3>();
      CHECK(((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(t(3, 0) == 0.0);
      CHECK(t(3, 3) == 1.0);
    }
  }
}
