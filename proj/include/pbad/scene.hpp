#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbad/model.hpp"
#include "pbad/objective.hpp"
#include "pbad/stepper.hpp"

namespace pbad {

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parsed scene file. Mirrors the JSON schema; model defaults (contact
/// samples, axis normalization) are applied by build_model, not here, so
/// serialization round-trips the input.
struct Scene {
  std::vector<LinkSpec> links;
  std::vector<bool> link_has_samples;  // whether contact_samples came from the file
  Vec3 gravity = Vec3::Zero();
  double drag_d = 0.0;
  std::optional<ContactModel> contact;
  std::optional<ActuationSpec> actuation;

  struct Integrator {
    std::string kind = "pbad";  // pbad | semi_implicit | forward_euler | rk2 | rk3 | rk4
    int order = 2;
    std::string objective = "energy";  // energy | residual
    std::string optimizer = "lm";      // lm | lbfgs
  };
  Integrator integrator;

  double dt = 0.0;
  double duration = 0.0;
  VecX q0;
  VecX qdot0;
};

/// Strict parse: unknown fields and malformed values raise SceneError
/// naming the offending field.
Scene parse_scene(const std::string& json_text);
Scene load_scene(const std::string& path);

/// Lossless serialization (17 significant digits).
std::string serialize_scene(const Scene& scene);

KinematicModel scene_model(const Scene& scene);
ForceModel scene_forces(const Scene& scene);
SimConfig scene_sim_config(const Scene& scene);

bool scene_is_pbad(const Scene& scene);
BaselineScheme scene_baseline_scheme(const Scene& scene);

// Bundled benchmark scenes.
Scene make_chain_scene(int segment_count);  // two hinge DOFs per segment
Scene make_single_hinge_chain_scene(int link_count);  // one hinge DOF per link
Scene make_swimmer_scene();
Scene make_spider_scene();

}  // namespace pbad
