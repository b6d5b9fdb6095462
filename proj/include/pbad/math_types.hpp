#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

namespace pbad {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Skew-symmetric cross-product matrix [v]x.
inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

/// Embeds a 3x3 block into the rotation slot of a 4x4 homogeneous
/// matrix, leaving translation and bottom row zero.
inline Mat4 embed_rotation(const Mat3& r) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = r;
  return m;
}

/// Frobenius inner product tr(A^T B).
inline double ddot(const Mat4& a, const Mat4& b) {
  return a.cwiseProduct(b).sum();
}

}  // namespace pbad
