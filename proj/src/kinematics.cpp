#include "pbad/kinematics.hpp"

#include <cmath>

namespace pbad {

namespace {

// Scalar coefficient functions of the rotation-vector map
//   R = I + A(n) K + B(n) K^2,  K = [theta]x,  n = |theta|,
// together with the smooth ratios that appear in dR and d2R:
//   f1 = A'(n)/n, f2 = B'(n)/n,
//   g1 = (A''(n) - A'(n)/n)/n^2, g2 = (B''(n) - B'(n)/n)/n^2.
// All six are even functions of n; below the switch they are
// evaluated by their Taylor series.
struct RotationCoeffs {
  double A, B, f1, f2, g1, g2;
};

constexpr double kSmallAngle = 1e-4;

RotationCoeffs rotation_coeffs(double n) {
  RotationCoeffs c;
  const double n2 = n * n;
  if (n < kSmallAngle) {
    const double n4 = n2 * n2;
    c.A = 1.0 - n2 / 6.0 + n4 / 120.0;
    c.B = 0.5 - n2 / 24.0 + n4 / 720.0;
    c.f1 = -1.0 / 3.0 + n2 / 30.0 - n4 / 840.0;
    c.f2 = -1.0 / 12.0 + n2 / 180.0 - n4 / 6720.0;
    c.g1 = 1.0 / 15.0 - n2 / 210.0 + n4 / 7560.0;
    c.g2 = 1.0 / 90.0 - n2 / 1680.0 + n4 / 75600.0;
  } else {
    const double s = std::sin(n);
    const double co = std::cos(n);
    const double n3 = n2 * n, n4 = n2 * n2;
    c.A = s / n;
    c.B = (1.0 - co) / n2;
    c.f1 = (n * co - s) / n3;
    c.f2 = (n * s + 2.0 * co - 2.0) / n4;
    c.g1 = (-n2 * s - 3.0 * n * co + 3.0 * s) / (n4 * n);
    c.g2 = (n2 * co - 5.0 * n * s - 8.0 * co + 8.0) / (n4 * n2);
  }
  return c;
}

// Rotation-vector jet: value, dR/dtheta_j and d2R/dtheta_j dtheta_l
// as 3x3 blocks.
void rotation_vector_jet(const Vec3& theta, Mat3& R, Mat3 dR[3], Mat3 d2R[3][3]) {
  const double n = theta.norm();
  const RotationCoeffs c = rotation_coeffs(n);
  const Mat3 K = skew(theta);
  const Mat3 K2 = K * K;
  Mat3 Kb[3];
  for (int j = 0; j < 3; ++j) Kb[j] = skew(Vec3::Unit(j));

  R = Mat3::Identity() + c.A * K + c.B * K2;

  Mat3 KbK_sym[3];
  for (int j = 0; j < 3; ++j) {
    KbK_sym[j] = Kb[j] * K + K * Kb[j];
    dR[j] = c.f1 * theta[j] * K + c.A * Kb[j] + c.f2 * theta[j] * K2 +
            c.B * KbK_sym[j];
  }
  for (int j = 0; j < 3; ++j) {
    for (int l = j; l < 3; ++l) {
      const double tjl = theta[j] * theta[l];
      const double djl = (j == l) ? 1.0 : 0.0;
      Mat3 m = (c.f1 * djl + c.g1 * tjl) * K +
               c.f1 * (theta[j] * Kb[l] + theta[l] * Kb[j]) +
               (c.f2 * djl + c.g2 * tjl) * K2 +
               c.f2 * (theta[j] * KbK_sym[l] + theta[l] * KbK_sym[j]) +
               c.B * (Kb[j] * Kb[l] + Kb[l] * Kb[j]);
      d2R[j][l] = m;
      d2R[l][j] = m;
    }
  }
}

}  // namespace

Mat3 rotation_vector_matrix(const Vec3& theta) {
  const double n = theta.norm();
  const RotationCoeffs c = rotation_coeffs(n);
  const Mat3 K = skew(theta);
  return Mat3::Identity() + c.A * K + c.B * (K * K);
}

Mat4 joint_transform(const JointSpec& joint, const VecX& q_local) {
  if (q_local.size() != joint.dof_count()) {
    throw ModelError("joint coordinate count mismatch");
  }
  Mat4 motion = Mat4::Identity();
  switch (joint.kind) {
    case JointKind::hinge:
      motion.topLeftCorner<3, 3>() = rotation_vector_matrix(joint.axis * q_local[0]);
      break;
    case JointKind::ball:
      motion.topLeftCorner<3, 3>() = rotation_vector_matrix(q_local.head<3>());
      break;
    case JointKind::free_joint:
      motion.topLeftCorner<3, 3>() = rotation_vector_matrix(q_local.tail<3>());
      motion.topRightCorner<3, 1>() = q_local.head<3>();
      break;
  }
  return joint.offset * motion;
}

JointJet joint_jet(const JointSpec& joint, const VecX& q_local) {
  if (q_local.size() != joint.dof_count()) {
    throw ModelError("joint coordinate count mismatch");
  }
  JointJet jet;
  const int dof = joint.dof_count();
  jet.d1.resize(dof);
  jet.d2.resize(dof * (dof + 1) / 2);

  switch (joint.kind) {
    case JointKind::hinge: {
      // R(t) = exp([a]x t): dR = [a]x R, d2R = [a]x^2 R.
      const Mat3 Ka = skew(joint.axis);
      const Mat3 R = rotation_vector_matrix(joint.axis * q_local[0]);
      Mat4 motion = Mat4::Identity();
      motion.topLeftCorner<3, 3>() = R;
      jet.value = joint.offset * motion;
      jet.d1[0] = joint.offset * embed_rotation(Ka * R);
      jet.d2[0] = joint.offset * embed_rotation(Ka * Ka * R);
      break;
    }
    case JointKind::ball: {
      Mat3 R, dR[3], d2R[3][3];
      rotation_vector_jet(q_local.head<3>(), R, dR, d2R);
      Mat4 motion = Mat4::Identity();
      motion.topLeftCorner<3, 3>() = R;
      jet.value = joint.offset * motion;
      for (int j = 0; j < 3; ++j) jet.d1[j] = joint.offset * embed_rotation(dR[j]);
      int idx = 0;
      for (int l = 0; l < 3; ++l)
        for (int j = 0; j <= l; ++j)
          jet.d2[idx++] = joint.offset * embed_rotation(d2R[j][l]);
      break;
    }
    case JointKind::free_joint: {
      // q = (t, theta); T = [R(theta) t; 0 1]. Translation derivatives
      // are constant; translation-rotation cross terms vanish.
      Mat3 R, dR[3], d2R[3][3];
      rotation_vector_jet(q_local.tail<3>(), R, dR, d2R);
      Mat4 motion = Mat4::Identity();
      motion.topLeftCorner<3, 3>() = R;
      motion.topRightCorner<3, 1>() = q_local.head<3>();
      jet.value = joint.offset * motion;
      for (int j = 0; j < 3; ++j) {
        Mat4 dt = Mat4::Zero();
        dt(j, 3) = 1.0;
        jet.d1[j] = joint.offset * dt;
        jet.d1[3 + j] = joint.offset * embed_rotation(dR[j]);
      }
      // d2 layout: translation rows/cols zero, rotation block from d2R.
      for (auto& m : jet.d2) m = Mat4::Zero();
      int idx = 0;
      for (int l = 0; l < 6; ++l)
        for (int j = 0; j <= l; ++j, ++idx)
          if (j >= 3 && l >= 3)
            jet.d2[idx] = joint.offset * embed_rotation(d2R[j - 3][l - 3]);
      break;
    }
  }
  return jet;
}

std::vector<Mat4> forward_pass(const KinematicModel& model, const Configuration& q) {
  validate_configuration(model, q);
  std::vector<Mat4> world(model.link_count());
  for (int i = 0; i < model.link_count(); ++i) {
    const Mat4 local = joint_transform(
        model.links[i].joint, q.segment(model.dof_offset(i), model.dof_count(i)));
    const int p = model.parent(i);
    world[i] = (p >= 0) ? Mat4(world[p] * local) : local;
  }
  return world;
}

std::vector<JointJet> all_joint_jets(const KinematicModel& model, const Configuration& q) {
  validate_configuration(model, q);
  std::vector<JointJet> jets;
  jets.reserve(model.link_count());
  for (int i = 0; i < model.link_count(); ++i) {
    jets.push_back(joint_jet(model.links[i].joint,
                             q.segment(model.dof_offset(i), model.dof_count(i))));
  }
  return jets;
}

}  // namespace pbad
