#include <doctest.h>

#include "pbad/model.hpp"
#include "test_helpers.hpp"

using namespace pbad;

namespace {

// Midpoint-rule quadrature of rho * [p;1][p;1]^T over a box volume.
Mat4 grid_quadrature_integral(const BoxGeometry& box, int cells) {
  Mat4 s = Mat4::Zero();
  const Vec3 h = box.size / cells;
  const double dv = h.prod();
  for (int ix = 0; ix < cells; ++ix) {
    for (int iy = 0; iy < cells; ++iy) {
      for (int iz = 0; iz < cells; ++iz) {
        Vec3 p = box.center - 0.5 * box.size +
                 Vec3((ix + 0.5) * h.x(), (iy + 0.5) * h.y(), (iz + 0.5) * h.z());
        Vec4 ph;
        ph << p, 1.0;
        s += box.density * dv * ph * ph.transpose();
      }
    }
  }
  return s;
}

LinkSpec box_link(const BoxGeometry& box) {
  LinkSpec link;
  link.parent = std::nullopt;
  link.joint.kind = JointKind::hinge;
  link.joint.axis = Vec3::UnitZ();
  link.geometry = box;
  return link;
}

}  // namespace

TEST_CASE("unit cube body integral") {
  BoxGeometry box;
  box.size = Vec3::Ones();
  box.density = 1.0;
  box.center = Vec3::Zero();
  const BodyIntegral bi = body_integral(box);
  Mat4 expected = Mat4::Zero();
  expected.diagonal() << 1.0 / 12, 1.0 / 12, 1.0 / 12, 1.0;
  CHECK((bi.S - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(bi.mass == doctest::Approx(1.0));
}

TEST_CASE("single point mass body integral") {
  PointMassGeometry pm;
  pm.masses.push_back({2.0, Vec3(1, 0, 0)});
  const BodyIntegral bi = body_integral(pm);
  Mat4 expected = Mat4::Zero();
  expected(0, 0) = 2.0;
  expected(0, 3) = 2.0;
  expected(3, 0) = 2.0;
  expected(3, 3) = 2.0;
  CHECK((bi.S - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK(bi.mass == doctest::Approx(2.0));
}

TEST_CASE("offset box matches grid quadrature") {
  BoxGeometry box;
  box.size = Vec3(2, 1, 1);
  box.density = 3.0;
  box.center = Vec3(0, 0, 0.5);
  const BodyIntegral bi = body_integral(box);
  const Mat4 oracle = grid_quadrature_integral(box, 48);
  CHECK(testing::rel_err(MatX(bi.S), MatX(oracle)) < 1e-3);
  CHECK(bi.S(3, 3) == doctest::Approx(bi.mass));
  // second-moment identity
  const double second_moment = bi.S.trace() - bi.mass;
  const double oracle_moment = oracle.trace() - oracle(3, 3);
  CHECK(testing::rel_err(second_moment, oracle_moment) < 1e-3);
}

TEST_CASE("body integral invariants") {
  std::mt19937 rng(7);
  SUBCASE("symmetry and PSD on random boxes") {
    std::uniform_real_distribution<double> uni(0.1, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
      BoxGeometry box;
      box.size = Vec3(uni(rng), uni(rng), uni(rng));
      box.density = 100.0 * uni(rng);
      box.center = Vec3(uni(rng) - 1, uni(rng) - 1, uni(rng) - 1);
      const BodyIntegral bi = body_integral(box);
      CHECK((bi.S - bi.S.transpose()).cwiseAbs().maxCoeff() <
            1e-12 * bi.S.cwiseAbs().maxCoeff());
      Eigen::SelfAdjointEigenSolver<Mat4> eig(bi.S);
      CHECK(eig.eigenvalues().minCoeff() > -1e-10 * bi.S.cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("point-mass listing order does not matter") {
    PointMassGeometry a;
    a.masses = {{1.0, Vec3(1, 2, 3)}, {2.0, Vec3(-1, 0, 1)}, {0.5, Vec3(0, 4, -2)}};
    PointMassGeometry b;
    b.masses = {a.masses[2], a.masses[0], a.masses[1]};
    CHECK((body_integral(a).S - body_integral(b).S).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("parallel-axis shift") {
    BoxGeometry base;
    base.size = Vec3(0.7, 0.3, 1.1);
    base.density = 800.0;
    base.center = Vec3(0.2, -0.1, 0.4);
    const Vec3 shift(0.5, 0.25, -0.3);
    BoxGeometry moved = base;
    moved.center += shift;
    const Mat4 s0 = body_integral(base).S;
    const Mat4 s1 = body_integral(moved).S;
    const double m = body_integral(base).mass;
    Mat4 expected_delta = Mat4::Zero();
    const Vec3& c0 = base.center;
    expected_delta.topLeftCorner<3, 3>() =
        m * (shift * shift.transpose() + shift * c0.transpose() +
             c0 * shift.transpose());
    expected_delta.topRightCorner<3, 1>() = m * shift;
    expected_delta.bottomLeftCorner<1, 3>() = m * shift.transpose();
    CHECK((s1 - s0 - expected_delta).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("build_model validation") {
  BoxGeometry box;
  SUBCASE("non-topological order") {
    LinkSpec a = box_link(box);
    LinkSpec b = box_link(box);
    a.parent = 1;  // forward reference
    CHECK_THROWS_AS(build_model({a, b}), ModelError);
  }
  SUBCASE("non-positive density") {
    BoxGeometry bad = box;
    bad.density = 0.0;
    CHECK_THROWS_AS(build_model({box_link(bad)}), ModelError);
  }
  SUBCASE("non-positive point mass") {
    PointMassGeometry pm;
    pm.masses.push_back({-1.0, Vec3::Zero()});
    LinkSpec link = box_link(box);
    link.geometry = pm;
    CHECK_THROWS_AS(build_model({link}), ModelError);
  }
  SUBCASE("zero-norm hinge axis") {
    LinkSpec link = box_link(box);
    link.joint.axis = Vec3::Zero();
    CHECK_THROWS_AS(build_model({link}), ModelError);
  }
  SUBCASE("contact samples default to the box corners") {
    const KinematicModel model = build_model({box_link(box)});
    CHECK(model.links[0].contact_samples.size() == 8);
    for (const auto& c : model.links[0].contact_samples) {
      CHECK(c.cwiseAbs().maxCoeff() == doctest::Approx(0.5));
    }
  }
}

TEST_CASE("validate_configuration") {
  const KinematicModel model = testing::planar_chain(10);
  REQUIRE(model.total_dofs == 10);
  CHECK_NOTHROW(validate_configuration(model, VecX::Zero(10)));
  CHECK_THROWS_AS(validate_configuration(model, VecX::Zero(9)), ModelError);
  VecX bad = VecX::Zero(10);
  bad[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate_configuration(model, bad), ModelError);
}
