#include "pbad/scene.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "pbad/kinematics.hpp"

namespace pbad {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw SceneError("scene: " + where + ": " + what);
}

const json& require(const json& j, const std::string& where, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) fail(where, "unknown field '" + key + "'");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail(where, "expected an array of 3 numbers");
  return Vec3(number(j[0], where), number(j[1], where), number(j[2], where));
}

VecX vecx(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  VecX v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<long>(i)] = number(j[i], where);
  return v;
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const VecX& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// Rotation vector of an orthonormal matrix (inverse of the exponential
// map), principal branch.
Vec3 rotation_vector_from_matrix(const Mat3& r) {
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double angle = std::acos(c);
  if (angle < 1e-9) {
    return 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  }
  if (angle > std::numbers::pi - 1e-6) {
    // near pi: axis from the dominant column of r + I
    const Mat3 m = r + Mat3::Identity();
    int col = 0;
    m.colwise().norm().maxCoeff(&col);
    Vec3 axis = m.col(col).normalized();
    // fix the sign from an off-diagonal element
    const Vec3 sv(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (sv.dot(axis) < 0.0) axis = -axis;
    return angle * axis;
  }
  const double s = 0.5 / std::sin(angle);
  return angle * s * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
}

Mat4 parse_offset(const json& j, const std::string& where) {
  check_keys(j, where, {"translation", "rotation_vector"});
  Mat4 m = Mat4::Identity();
  if (j.contains("translation")) {
    m.topRightCorner<3, 1>() = vec3(j["translation"], where + ".translation");
  }
  if (j.contains("rotation_vector")) {
    m.topLeftCorner<3, 3>() =
        rotation_vector_matrix(vec3(j["rotation_vector"], where + ".rotation_vector"));
  }
  return m;
}

LinkSpec parse_link(const json& j, const std::string& where, bool& has_samples) {
  check_keys(j, where, {"parent", "joint", "geometry", "contact_samples"});
  LinkSpec link;

  const json& jp = require(j, where, "parent");
  if (jp.is_null()) {
    link.parent = std::nullopt;
  } else if (jp.is_number_integer()) {
    link.parent = jp.get<int>();
  } else {
    fail(where + ".parent", "expected an integer or null");
  }

  const json& jj = require(j, where, "joint");
  check_keys(jj, where + ".joint", {"kind", "axis", "offset"});
  const std::string kind = require(jj, where + ".joint", "kind").get<std::string>();
  if (kind == "hinge") {
    link.joint.kind = JointKind::hinge;
    link.joint.axis = vec3(require(jj, where + ".joint", "axis"), where + ".joint.axis");
  } else if (kind == "ball") {
    link.joint.kind = JointKind::ball;
  } else if (kind == "free") {
    link.joint.kind = JointKind::free_joint;
  } else {
    fail(where + ".joint.kind", "expected hinge, ball or free");
  }
  if (jj.contains("offset")) {
    link.joint.offset = parse_offset(jj["offset"], where + ".joint.offset");
  }

  const json& jg = require(j, where, "geometry");
  check_keys(jg, where + ".geometry", {"box", "point_masses"});
  if (jg.contains("box") == jg.contains("point_masses")) {
    fail(where + ".geometry", "expected exactly one of box or point_masses");
  }
  if (jg.contains("box")) {
    const json& jb = jg["box"];
    check_keys(jb, where + ".geometry.box", {"size", "density", "center"});
    BoxGeometry box;
    box.size = vec3(require(jb, where + ".geometry.box", "size"),
                    where + ".geometry.box.size");
    box.density = number(require(jb, where + ".geometry.box", "density"),
                         where + ".geometry.box.density");
    if (jb.contains("center")) {
      box.center = vec3(jb["center"], where + ".geometry.box.center");
    }
    link.geometry = box;
  } else {
    PointMassGeometry pm;
    const json& ja = jg["point_masses"];
    if (!ja.is_array()) fail(where + ".geometry.point_masses", "expected an array");
    for (size_t i = 0; i < ja.size(); ++i) {
      const std::string pw = where + ".geometry.point_masses[" + std::to_string(i) + "]";
      check_keys(ja[i], pw, {"mass", "position"});
      PointMass p;
      p.mass = number(require(ja[i], pw, "mass"), pw + ".mass");
      p.position = vec3(require(ja[i], pw, "position"), pw + ".position");
      pm.masses.push_back(p);
    }
    link.geometry = pm;
  }

  has_samples = j.contains("contact_samples");
  if (has_samples) {
    const json& js = j["contact_samples"];
    if (!js.is_array()) fail(where + ".contact_samples", "expected an array");
    for (size_t i = 0; i < js.size(); ++i) {
      link.contact_samples.push_back(
          vec3(js[i], where + ".contact_samples[" + std::to_string(i) + "]"));
    }
  }
  return link;
}

}  // namespace

Scene parse_scene(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SceneError(std::string("scene: JSON parse error: ") + e.what());
  }
  check_keys(j, "top level",
             {"links", "gravity", "drag_D", "contact", "actuation", "integrator", "dt",
              "duration", "initial"});

  Scene s;
  const json& jl = require(j, "top level", "links");
  if (!jl.is_array() || jl.empty()) fail("links", "expected a non-empty array");
  for (size_t i = 0; i < jl.size(); ++i) {
    bool has_samples = false;
    s.links.push_back(
        parse_link(jl[i], "links[" + std::to_string(i) + "]", has_samples));
    s.link_has_samples.push_back(has_samples);
  }

  s.gravity = vec3(require(j, "top level", "gravity"), "gravity");
  if (j.contains("drag_D")) {
    s.drag_d = number(j["drag_D"], "drag_D");
    if (s.drag_d < 0.0) fail("drag_D", "must be non-negative");
  }
  if (j.contains("contact")) {
    const json& jc = j["contact"];
    check_keys(jc, "contact", {"normal", "offset", "D1", "D2"});
    ContactModel cm;
    cm.plane_normal = vec3(require(jc, "contact", "normal"), "contact.normal");
    if (std::abs(cm.plane_normal.norm() - 1.0) > 1e-9) {
      fail("contact.normal", "must have unit norm");
    }
    cm.plane_offset = number(require(jc, "contact", "offset"), "contact.offset");
    cm.d1 = number(require(jc, "contact", "D1"), "contact.D1");
    cm.d2 = number(require(jc, "contact", "D2"), "contact.D2");
    if (cm.d1 < 0.0 || cm.d2 < 0.0) fail("contact", "penalties must be non-negative");
    s.contact = cm;
  }
  if (j.contains("actuation")) {
    const json& ja = j["actuation"];
    check_keys(ja, "actuation", {"kind", "amplitude", "frequency_hz", "phase"});
    ActuationSpec act;
    const std::string kind = require(ja, "actuation", "kind").get<std::string>();
    if (kind == "constant") {
      act.kind = ActuationSpec::Kind::constant;
    } else if (kind == "sinusoidal") {
      act.kind = ActuationSpec::Kind::sinusoidal;
    } else {
      fail("actuation.kind", "expected constant or sinusoidal");
    }
    act.amplitude = vecx(require(ja, "actuation", "amplitude"), "actuation.amplitude");
    if (kind == "sinusoidal") {
      act.frequency_hz =
          number(require(ja, "actuation", "frequency_hz"), "actuation.frequency_hz");
      if (ja.contains("phase")) act.phase = vecx(ja["phase"], "actuation.phase");
      if (act.phase.size() && act.phase.size() != act.amplitude.size()) {
        fail("actuation.phase", "length must match amplitude");
      }
    }
    s.actuation = act;
  }

  const json& ji = require(j, "top level", "integrator");
  check_keys(ji, "integrator", {"kind", "order", "objective", "optimizer"});
  s.integrator.kind = require(ji, "integrator", "kind").get<std::string>();
  const bool known_kind =
      s.integrator.kind == "pbad" || s.integrator.kind == "semi_implicit" ||
      s.integrator.kind == "forward_euler" || s.integrator.kind == "rk2" ||
      s.integrator.kind == "rk3" || s.integrator.kind == "rk4";
  if (!known_kind) fail("integrator.kind", "unknown integrator '" + s.integrator.kind + "'");
  if (ji.contains("order")) {
    if (!ji["order"].is_number_integer()) fail("integrator.order", "expected an integer");
    s.integrator.order = ji["order"].get<int>();
    if (s.integrator.order < 2 || s.integrator.order > 6) {
      fail("integrator.order", "order must be in [2, 6]");
    }
  }
  if (ji.contains("objective")) {
    s.integrator.objective = ji["objective"].get<std::string>();
    if (s.integrator.objective != "energy" && s.integrator.objective != "residual") {
      fail("integrator.objective", "expected energy or residual");
    }
  } else {
    s.integrator.objective = s.integrator.order == 2 ? "energy" : "residual";
  }
  if (s.integrator.objective == "energy" && s.integrator.order != 2) {
    fail("integrator.objective", "the energy objective requires order 2");
  }
  if (ji.contains("optimizer")) {
    s.integrator.optimizer = ji["optimizer"].get<std::string>();
    if (s.integrator.optimizer != "lm" && s.integrator.optimizer != "lbfgs") {
      fail("integrator.optimizer", "expected lm or lbfgs");
    }
  }

  s.dt = number(require(j, "top level", "dt"), "dt");
  if (s.dt <= 0.0) fail("dt", "must be positive");
  s.duration = number(require(j, "top level", "duration"), "duration");
  if (s.duration <= 0.0) fail("duration", "must be positive");

  const json& j0 = require(j, "top level", "initial");
  check_keys(j0, "initial", {"q", "qdot"});
  s.q0 = vecx(require(j0, "initial", "q"), "initial.q");
  s.qdot0 = vecx(require(j0, "initial", "qdot"), "initial.qdot");
  if (s.q0.size() != s.qdot0.size()) {
    fail("initial", "q and qdot must have the same length");
  }
  return s;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("scene: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene(buf.str());
}

std::string serialize_scene(const Scene& scene) {
  json j;
  j["links"] = json::array();
  for (size_t i = 0; i < scene.links.size(); ++i) {
    const LinkSpec& link = scene.links[i];
    json jl;
    jl["parent"] = link.parent ? json(*link.parent) : json(nullptr);
    json jj;
    switch (link.joint.kind) {
      case JointKind::hinge:
        jj["kind"] = "hinge";
        jj["axis"] = to_json(link.joint.axis);
        break;
      case JointKind::ball:
        jj["kind"] = "ball";
        break;
      case JointKind::free_joint:
        jj["kind"] = "free";
        break;
    }
    json off;
    off["translation"] = to_json(Vec3(link.joint.offset.topRightCorner<3, 1>()));
    off["rotation_vector"] = to_json(
        rotation_vector_from_matrix(link.joint.offset.topLeftCorner<3, 3>()));
    jj["offset"] = off;
    jl["joint"] = jj;

    json jg;
    if (const auto* box = std::get_if<BoxGeometry>(&link.geometry)) {
      json jb;
      jb["size"] = to_json(box->size);
      jb["density"] = box->density;
      jb["center"] = to_json(box->center);
      jg["box"] = jb;
    } else {
      const auto& pm = std::get<PointMassGeometry>(link.geometry);
      json ja = json::array();
      for (const auto& p : pm.masses) {
        ja.push_back({{"mass", p.mass}, {"position", to_json(p.position)}});
      }
      jg["point_masses"] = ja;
    }
    jl["geometry"] = jg;

    if (i < scene.link_has_samples.size() && scene.link_has_samples[i]) {
      json js = json::array();
      for (const auto& c : link.contact_samples) js.push_back(to_json(c));
      jl["contact_samples"] = js;
    }
    j["links"].push_back(jl);
  }

  j["gravity"] = to_json(scene.gravity);
  if (scene.drag_d > 0.0) j["drag_D"] = scene.drag_d;
  if (scene.contact) {
    j["contact"] = {{"normal", to_json(scene.contact->plane_normal)},
                    {"offset", scene.contact->plane_offset},
                    {"D1", scene.contact->d1},
                    {"D2", scene.contact->d2}};
  }
  if (scene.actuation) {
    json ja;
    ja["kind"] = scene.actuation->kind == ActuationSpec::Kind::constant ? "constant"
                                                                        : "sinusoidal";
    ja["amplitude"] = to_json(scene.actuation->amplitude);
    if (scene.actuation->kind == ActuationSpec::Kind::sinusoidal) {
      ja["frequency_hz"] = scene.actuation->frequency_hz;
      if (scene.actuation->phase.size()) ja["phase"] = to_json(scene.actuation->phase);
    }
    j["actuation"] = ja;
  }

  j["integrator"] = {{"kind", scene.integrator.kind},
                     {"order", scene.integrator.order},
                     {"objective", scene.integrator.objective},
                     {"optimizer", scene.integrator.optimizer}};
  j["dt"] = scene.dt;
  j["duration"] = scene.duration;
  j["initial"] = {{"q", to_json(scene.q0)}, {"qdot", to_json(scene.qdot0)}};
  return j.dump(2) + "\n";
}

KinematicModel scene_model(const Scene& scene) {
  KinematicModel model = build_model(scene.links);
  if (scene.q0.size() != model.total_dofs) {
    throw SceneError("scene: initial.q length " + std::to_string(scene.q0.size()) +
                     " does not match model DOF count " +
                     std::to_string(model.total_dofs));
  }
  if (scene.actuation && scene.actuation->amplitude.size() != model.total_dofs) {
    throw SceneError("scene: actuation.amplitude length does not match DOF count");
  }
  return model;
}

ForceModel scene_forces(const Scene& scene) {
  ForceModel f;
  f.gravity = scene.gravity;
  f.drag_d = scene.drag_d;
  f.contact = scene.contact;
  f.actuation = scene.actuation;
  return f;
}

SimConfig scene_sim_config(const Scene& scene) {
  SimConfig sim;
  sim.dt = scene.dt;
  sim.duration = scene.duration;
  sim.order = scene.integrator.order;
  sim.objective = scene.integrator.objective == "energy" ? ObjectiveKind::energy_form
                                                         : ObjectiveKind::residual_form;
  sim.optimizer.kind =
      scene.integrator.optimizer == "lm" ? OptimizerKind::lm : OptimizerKind::lbfgs;
  sim.q0 = scene.q0;
  sim.qdot0 = scene.qdot0;
  return sim;
}

bool scene_is_pbad(const Scene& scene) { return scene.integrator.kind == "pbad"; }

BaselineScheme scene_baseline_scheme(const Scene& scene) {
  const std::string& k = scene.integrator.kind;
  if (k == "forward_euler") return BaselineScheme::forward_euler;
  if (k == "semi_implicit") return BaselineScheme::semi_implicit;
  if (k == "rk2") return BaselineScheme::rk2;
  if (k == "rk3") return BaselineScheme::rk3;
  if (k == "rk4") return BaselineScheme::rk4;
  throw SceneError("scene: integrator '" + k + "' is not a baseline scheme");
}

namespace {

Mat4 translation(double x, double y, double z) {
  Mat4 m = Mat4::Identity();
  m(0, 3) = x;
  m(1, 3) = y;
  m(2, 3) = z;
  return m;
}

Mat4 rotation_z(double angle) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_vector_matrix(Vec3(0, 0, angle));
  return m;
}

BoxGeometry chain_link_box() {
  BoxGeometry box;
  box.size = Vec3(0.5, 0.1, 0.1);
  box.density = 1000.0;
  box.center = Vec3(0.25, 0.0, 0.0);
  return box;
}

}  // namespace

Scene make_chain_scene(int segment_count) {
  Scene s;
  for (int i = 0; i < segment_count; ++i) {
    // massless connector carrying the first hinge DOF of the segment
    LinkSpec connector;
    connector.parent = i == 0 ? std::nullopt : std::optional<int>(2 * i - 1);
    connector.joint.kind = JointKind::hinge;
    connector.joint.axis = Vec3::UnitZ();
    connector.joint.offset = i == 0 ? Mat4::Identity() : translation(0.5, 0.0, 0.0);
    connector.geometry = PointMassGeometry{};

    LinkSpec body;
    body.parent = 2 * i;
    body.joint.kind = JointKind::hinge;
    body.joint.axis = Vec3::UnitY();
    body.geometry = chain_link_box();

    s.links.push_back(connector);
    s.links.push_back(body);
  }
  s.link_has_samples.assign(s.links.size(), false);
  s.gravity = Vec3(0, 0, -9.81);
  s.integrator.kind = "pbad";
  s.integrator.order = 2;
  s.integrator.objective = "energy";
  s.integrator.optimizer = "lm";
  s.dt = 0.0025;
  s.duration = 10.0;
  s.q0 = VecX::Zero(2 * segment_count);
  s.qdot0 = VecX::Zero(2 * segment_count);
  return s;
}

Scene make_single_hinge_chain_scene(int link_count) {
  Scene s;
  for (int i = 0; i < link_count; ++i) {
    LinkSpec link;
    link.parent = i == 0 ? std::nullopt : std::optional<int>(i - 1);
    link.joint.kind = JointKind::hinge;
    link.joint.axis = Vec3::UnitY();
    link.joint.offset = i == 0 ? Mat4::Identity() : translation(0.5, 0.0, 0.0);
    link.geometry = chain_link_box();
    s.links.push_back(link);
  }
  s.link_has_samples.assign(s.links.size(), false);
  s.gravity = Vec3(0, 0, -9.81);
  s.integrator.kind = "pbad";
  s.integrator.order = 2;
  s.integrator.objective = "energy";
  s.integrator.optimizer = "lm";
  s.dt = 0.0025;
  s.duration = 10.0;
  s.q0 = VecX::Zero(link_count);
  s.qdot0 = VecX::Zero(link_count);
  return s;
}

Scene make_swimmer_scene() {
  Scene s;
  LinkSpec head;
  head.parent = std::nullopt;
  head.joint.kind = JointKind::free_joint;
  BoxGeometry hb;
  hb.size = Vec3(0.5, 0.1, 0.05);
  hb.density = 1000.0;
  hb.center = Vec3(0.25, 0.0, 0.0);
  head.geometry = hb;
  s.links.push_back(head);
  for (int i = 0; i < 3; ++i) {
    LinkSpec seg;
    seg.parent = i;
    seg.joint.kind = JointKind::hinge;
    seg.joint.axis = Vec3::UnitZ();
    seg.joint.offset = translation(0.5, 0.0, 0.0);
    seg.geometry = hb;
    s.links.push_back(seg);
  }
  s.link_has_samples.assign(s.links.size(), false);
  s.gravity = Vec3::Zero();  // neutrally buoyant
  s.drag_d = 2.0;
  ActuationSpec act;
  act.kind = ActuationSpec::Kind::sinusoidal;
  act.amplitude = VecX::Zero(9);
  act.phase = VecX::Zero(9);
  for (int i = 0; i < 3; ++i) {
    act.amplitude[6 + i] = 6.0;
    act.phase[6 + i] = i * (std::numbers::pi / 2.0);
  }
  act.frequency_hz = 0.5;
  s.actuation = act;
  s.integrator.kind = "pbad";
  s.integrator.order = 2;
  s.integrator.objective = "energy";
  s.integrator.optimizer = "lm";
  s.dt = 0.05;
  s.duration = 10.0;
  s.q0 = VecX::Zero(9);
  s.qdot0 = VecX::Zero(9);
  return s;
}

Scene make_spider_scene() {
  Scene s;
  LinkSpec torso;
  torso.parent = std::nullopt;
  torso.joint.kind = JointKind::free_joint;
  BoxGeometry tb;
  tb.size = Vec3(0.4, 0.4, 0.1);
  tb.density = 1000.0;
  tb.center = Vec3::Zero();
  torso.geometry = tb;
  s.links.push_back(torso);

  BoxGeometry leg;
  leg.size = Vec3(0.25, 0.06, 0.06);
  leg.density = 1000.0;
  leg.center = Vec3(0.125, 0.0, 0.0);

  const double c = 0.18;
  const double angles[4] = {std::numbers::pi / 4.0, 3.0 * std::numbers::pi / 4.0,
                            -3.0 * std::numbers::pi / 4.0, -std::numbers::pi / 4.0};
  const double cx[4] = {c, -c, -c, c};
  const double cy[4] = {c, c, -c, -c};
  for (int l = 0; l < 4; ++l) {
    LinkSpec hip;
    hip.parent = 0;
    hip.joint.kind = JointKind::ball;
    hip.joint.offset = translation(cx[l], cy[l], 0.0) * rotation_z(angles[l]);
    hip.geometry = leg;
    s.links.push_back(hip);

    LinkSpec shin;
    shin.parent = 1 + 2 * l;
    shin.joint.kind = JointKind::hinge;
    shin.joint.axis = Vec3::UnitY();
    shin.joint.offset = translation(0.25, 0.0, 0.0);
    shin.geometry = leg;
    s.links.push_back(shin);
  }
  s.link_has_samples.assign(s.links.size(), false);
  s.gravity = Vec3(0, 0, -9.81);
  ContactModel cm;
  cm.plane_normal = Vec3::UnitZ();
  cm.plane_offset = 0.0;
  cm.d1 = 2.0e4;
  cm.d2 = 2.0e2;
  s.contact = cm;
  s.integrator.kind = "pbad";
  s.integrator.order = 2;
  s.integrator.objective = "energy";
  s.integrator.optimizer = "lm";
  s.dt = 0.01;
  s.duration = 3.0;
  s.q0 = VecX::Zero(22);
  s.qdot0 = VecX::Zero(22);
  // drop pose: torso above the plane, legs sloping down so the feet land
  // first; per leg the DOF block is (hip ball xyz, knee)
  s.q0[2] = 0.4;
  for (int l = 0; l < 4; ++l) {
    s.q0[6 + 4 * l + 1] = 0.5;  // hip pitch (rotation-vector y)
    s.q0[6 + 4 * l + 3] = 0.4;  // knee
  }
  return s;
}

}  // namespace pbad
