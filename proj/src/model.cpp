#include "pbad/model.hpp"

#include <cmath>

namespace pbad {

namespace {

void check_offset(const Mat4& offset, int link_index) {
  const Mat3 r = offset.topLeftCorner<3, 3>();
  if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ModelError("link " + std::to_string(link_index) +
                     ": joint offset rotation block is not orthonormal");
  }
  if (offset(3, 0) != 0.0 || offset(3, 1) != 0.0 || offset(3, 2) != 0.0 ||
      offset(3, 3) != 1.0) {
    throw ModelError("link " + std::to_string(link_index) +
                     ": joint offset bottom row must be (0,0,0,1)");
  }
}

std::vector<Vec3> box_corners(const BoxGeometry& box) {
  std::vector<Vec3> corners;
  corners.reserve(8);
  const Vec3 h = 0.5 * box.size;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        corners.push_back(box.center + Vec3(sx * h.x(), sy * h.y(), sz * h.z()));
  return corners;
}

}  // namespace

BodyIntegral body_integral(const Geometry& geometry) {
  BodyIntegral out;
  if (const auto* box = std::get_if<BoxGeometry>(&geometry)) {
    const double m = box->density * box->size.prod();
    const Vec3& c = box->center;
    const Mat3 delta =
        Vec3(box->size.x() * box->size.x(), box->size.y() * box->size.y(),
             box->size.z() * box->size.z())
            .asDiagonal() *
        (1.0 / 12.0);
    out.S.topLeftCorner<3, 3>() = m * (c * c.transpose() + delta);
    out.S.topRightCorner<3, 1>() = m * c;
    out.S.bottomLeftCorner<1, 3>() = m * c.transpose();
    out.S(3, 3) = m;
    out.mass = m;
  } else {
    const auto& pts = std::get<PointMassGeometry>(geometry);
    for (const auto& pm : pts.masses) {
      Vec4 h;
      h << pm.position, 1.0;
      out.S += pm.mass * h * h.transpose();
      out.mass += pm.mass;
    }
  }
  return out;
}

KinematicModel build_model(std::vector<LinkSpec> links) {
  KinematicModel model;
  model.links = std::move(links);
  model.dof_offsets.resize(model.links.size());

  for (int i = 0; i < model.link_count(); ++i) {
    auto& link = model.links[i];
    if (link.parent && *link.parent >= i) {
      throw ModelError("link " + std::to_string(i) +
                       ": parent index must be smaller than own index");
    }
    if (link.parent && *link.parent < 0) {
      throw ModelError("link " + std::to_string(i) + ": negative parent index");
    }
    if (link.joint.kind == JointKind::hinge) {
      const double n = link.joint.axis.norm();
      if (std::abs(n - 1.0) > 1e-12) {
        if (n < 1e-12) {
          throw ModelError("link " + std::to_string(i) + ": zero-norm hinge axis");
        }
        link.joint.axis /= n;
      }
    }
    check_offset(link.joint.offset, i);

    if (const auto* box = std::get_if<BoxGeometry>(&link.geometry)) {
      if (box->density <= 0.0) {
        throw ModelError("link " + std::to_string(i) + ": non-positive density");
      }
      if (box->size.minCoeff() <= 0.0) {
        throw ModelError("link " + std::to_string(i) + ": non-positive box extent");
      }
      if (link.contact_samples.empty()) link.contact_samples = box_corners(*box);
    } else {
      const auto& pts = std::get<PointMassGeometry>(link.geometry);
      for (const auto& pm : pts.masses) {
        if (pm.mass <= 0.0) {
          throw ModelError("link " + std::to_string(i) + ": non-positive point mass");
        }
      }
      if (link.contact_samples.empty()) {
        for (const auto& pm : pts.masses) link.contact_samples.push_back(pm.position);
      }
    }

    model.body_integrals.push_back(body_integral(link.geometry));
    model.dof_offsets[i] = model.total_dofs;
    model.total_dofs += link.joint.dof_count();
  }
  return model;
}

void validate_configuration(const KinematicModel& model, const Configuration& q) {
  if (q.size() != model.total_dofs) {
    throw ModelError("configuration length " + std::to_string(q.size()) +
                     " does not match model DOF count " +
                     std::to_string(model.total_dofs));
  }
  if (!q.allFinite()) {
    throw ModelError("configuration contains a non-finite entry");
  }
}

}  // namespace pbad
