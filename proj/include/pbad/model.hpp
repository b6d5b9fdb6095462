#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pbad/math_types.hpp"

namespace pbad {

/// Error raised on invalid model definitions or configurations.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class JointKind { hinge, ball, free_joint };

/// Joint attaching a link to its parent: a fixed offset transform
/// followed by the joint motion (hinge angle, rotation vector, or
/// translation + rotation vector).
struct JointSpec {
  JointKind kind = JointKind::hinge;
  Vec3 axis = Vec3::UnitZ();  // hinge only, unit norm
  Mat4 offset = Mat4::Identity();

  int dof_count() const {
    switch (kind) {
      case JointKind::hinge: return 1;
      case JointKind::ball: return 3;
      case JointKind::free_joint: return 6;
    }
    return 0;
  }
};

/// Axis-aligned box in the link frame, constant density.
struct BoxGeometry {
  Vec3 size = Vec3::Ones();    // full extents w, h, d [m]
  double density = 1000.0;     // [kg/m^3]
  Vec3 center = Vec3::Zero();  // [m]
};

struct PointMass {
  double mass = 0.0;  // [kg]
  Vec3 position = Vec3::Zero();
};

struct PointMassGeometry {
  std::vector<PointMass> masses;
};

using Geometry = std::variant<BoxGeometry, PointMassGeometry>;

struct LinkSpec {
  std::optional<int> parent;  // none = root (attached to world)
  JointSpec joint;
  Geometry geometry;
  std::vector<Vec3> contact_samples;  // body frame; defaulted by build_model
};

/// Mass-weighted second moment of a body: S = integral of
/// rho * [p;1][p;1]^T over the body, with density folded in.
struct BodyIntegral {
  Mat4 S = Mat4::Zero();
  double mass = 0.0;
};

/// Immutable articulated tree. Links are topologically ordered
/// (parent index < own index); safe to share across threads.
struct KinematicModel {
  std::vector<LinkSpec> links;
  std::vector<BodyIntegral> body_integrals;
  std::vector<int> dof_offsets;
  int total_dofs = 0;

  int link_count() const { return static_cast<int>(links.size()); }
  int dof_offset(int link) const { return dof_offsets[link]; }
  int dof_count(int link) const { return links[link].joint.dof_count(); }
  int parent(int link) const { return links[link].parent ? *links[link].parent : -1; }
  double total_mass() const {
    double m = 0.0;
    for (const auto& b : body_integrals) m += b.mass;
    return m;
  }
};

/// Generalized-coordinate vector for one time instance.
using Configuration = VecX;

/// Validates link ordering and geometry, precomputes body integrals.
KinematicModel build_model(std::vector<LinkSpec> links);

/// Checks that q has the right length and only finite entries.
void validate_configuration(const KinematicModel& model, const Configuration& q);

/// Body integral of a single geometry (exposed for testing).
BodyIntegral body_integral(const Geometry& geometry);

}  // namespace pbad
