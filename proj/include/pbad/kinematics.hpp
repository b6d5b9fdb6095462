#pragma once

#include <vector>

#include "pbad/math_types.hpp"
#include "pbad/model.hpp"

namespace pbad {

/// Joint-local transform T(q) with its first and second partial
/// derivatives with respect to the joint's own coordinates. Second
/// derivatives are stored once for j <= l.
struct JointJet {
  Mat4 value = Mat4::Identity();
  std::vector<Mat4> d1;  // size dof
  std::vector<Mat4> d2;  // size dof*(dof+1)/2, index via d2_at

  const Mat4& d2_at(int j, int l) const {
    if (j > l) std::swap(j, l);
    return d2[l * (l + 1) / 2 + j];
  }
};

/// Analytic jet of the joint-local map offset * motion(q_local).
/// Rotation-vector joints switch to series expansions below
/// |theta| = 1e-4 to avoid 0/0 in the closed forms.
JointJet joint_jet(const JointSpec& joint, const VecX& q_local);

/// Joint-local transform only (cheaper than the full jet).
Mat4 joint_transform(const JointSpec& joint, const VecX& q_local);

/// World transforms T^i for all links; the root's parent is identity.
std::vector<Mat4> forward_pass(const KinematicModel& model, const Configuration& q);

/// Jets of every joint at q (local slices of q per link).
std::vector<JointJet> all_joint_jets(const KinematicModel& model, const Configuration& q);

/// Rotation-vector (exponential-map) rotation matrix, exposed for tests.
Mat3 rotation_vector_matrix(const Vec3& theta);

}  // namespace pbad
