#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skysmooth/geometry.hpp"

namespace skysmooth {

/// A benchmark world: rectangular bounds, a start/goal pair whose
/// connecting segment is the predefined route, and static obstacles.
struct Scene {
  std::string name;
  Bounds bounds;
  Vec2 start;
  Vec2 goal;
  std::vector<ObstacleShape> obstacles;

  bool operator==(const Scene&) const = default;
};

/// Position expressed relative to the predefined route: arc length s from
/// the start and unsigned perpendicular deviation from the segment.
struct RouteFrame {
  double s = 0.0;
  double deviation = 0.0;
};

inline double route_length(const Scene& scene) {
  return distance(scene.start, scene.goal);
}

/// Clamped scalar projection of p onto the route segment plus the
/// distance from p to the segment.
inline RouteFrame project_onto_route(const Scene& scene, Vec2 p) {
  const Vec2 d = scene.goal - scene.start;
  const double len = d.norm();
  if (len == 0.0) return {0.0, distance(p, scene.start)};
  const Vec2 u = d / len;
  const double s = std::clamp(dot(p - scene.start, u), 0.0, len);
  const double deviation = distance(p, scene.start + u * s);
  return {s, deviation};
}

/// All invariant violations, empty when the scene is well formed.
inline std::vector<std::string> validate_scene(const Scene& scene) {
  std::vector<std::string> v;
  auto fail = [&](const std::string& msg) { v.push_back(msg); };

  if (!(scene.bounds.min.x < scene.bounds.max.x) ||
      !(scene.bounds.min.y < scene.bounds.max.y))
    fail("bounds min must be strictly below max in both axes");
  for (std::size_t i = 0; i < scene.obstacles.size(); ++i) {
    const std::string tag = "obstacle " + std::to_string(i);
    if (const auto* d = std::get_if<Disc>(&scene.obstacles[i])) {
      if (!(d->radius > 0.0)) fail(tag + ": radius must be positive");
    } else if (const auto* p = std::get_if<RegularPolygon>(&scene.obstacles[i])) {
      if (!(p->circumradius > 0.0)) fail(tag + ": circumradius must be positive");
      if (p->sides < 3) fail(tag + ": sides must be at least 3");
    } else if (const auto* b = std::get_if<Box>(&scene.obstacles[i])) {
      if (!(b->half_extents.x > 0.0 && b->half_extents.y > 0.0))
        fail(tag + ": half_extents must be positive");
    }
  }
  if (scene.start == scene.goal) fail("start equals goal");
  if (!scene.bounds.contains(scene.start)) fail("start outside bounds");
  if (!scene.bounds.contains(scene.goal)) fail("goal outside bounds");
  if (v.empty()) {
    // the clearance checks need valid shapes, so run them only then
    for (std::size_t i = 0; i < scene.obstacles.size(); ++i) {
      for (const auto& [point, label] :
           {std::pair{scene.start, "start"}, std::pair{scene.goal, "goal"}}) {
        const double d = signed_distance(point, scene.obstacles[i]);
        if (d < 0.0)
          fail(std::string(label) + " inside obstacle " + std::to_string(i));
        else if (d < 1.0)
          fail(std::string(label) + " within 1 m of obstacle " + std::to_string(i));
      }
    }
  }
  return v;
}

namespace detail {

// Hexagonal prism cross-section from the benchmark set, diameter 2.55 m.
inline constexpr double kHexCircumradius = 1.275;
// Lateral offset of obstacle centers from the route, alternating sign.
inline constexpr double kLateralOffset = 1.0;
inline constexpr double kSceneHalfWidth = 7.5;
inline constexpr double kEndpointInset = 1.0;

inline Scene hex_corridor(std::string name, double length, int n_obstacles) {
  Scene scene;
  scene.name = std::move(name);
  scene.bounds = {{0.0, 0.0}, {length, 2.0 * kSceneHalfWidth}};
  scene.start = {kEndpointInset, kSceneHalfWidth};
  scene.goal = {length - kEndpointInset, kSceneHalfWidth};
  const double span = scene.goal.x - scene.start.x;
  for (int i = 1; i <= n_obstacles; ++i) {
    const double x = scene.start.x + span * i / (n_obstacles + 1);
    const double y = kSceneHalfWidth + (i % 2 == 1 ? kLateralOffset : -kLateralOffset);
    scene.obstacles.push_back(RegularPolygon{{x, y}, kHexCircumradius, 6, 0.0});
  }
  return scene;
}

inline Scene mixed_shapes_scene() {
  Scene scene;
  scene.name = "ts3";
  scene.bounds = {{0.0, 0.0}, {20.0, 15.0}};
  scene.start = {1.0, 7.5};
  scene.goal = {19.0, 7.5};
  // cube straddling the route, passable below
  scene.obstacles.push_back(Box{{5.0, 8.2}, {1.1, 1.1}, 0.0});
  // disc straddling the route, passable above
  scene.obstacles.push_back(Disc{{9.5, 6.6}, 1.2});
  // wall with a door gap at y in [8.4, 11.0]; the route must detour through it
  scene.obstacles.push_back(Box{{14.0, 4.2}, {0.35, 4.2}, 0.0});
  scene.obstacles.push_back(Box{{14.0, 13.0}, {0.35, 2.0}, 0.0});
  return scene;
}

}  // namespace detail

/// One of the builtin benchmark scenes: "train", "ts1", "ts2", "ts3".
inline Scene builtin_scene(const std::string& name) {
  if (name == "train") return detail::hex_corridor("train", 20.0, 4);
  if (name == "ts1") return detail::hex_corridor("ts1", 20.0, 6);
  if (name == "ts2") return detail::hex_corridor("ts2", 45.0, 8);
  if (name == "ts3") return detail::mixed_shapes_scene();
  throw std::invalid_argument("unknown scene \"" + name +
                              "\"; valid names: train, ts1, ts2, ts3");
}

namespace detail {

using nlohmann::json;

inline const json& require_field(const json& j, const std::string& key,
                                 const std::string& context) {
  if (!j.contains(key))
    throw std::runtime_error("scene file: missing field \"" + key + "\" in " +
                             context);
  return j.at(key);
}

inline double number_field(const json& j, const std::string& key,
                           const std::string& context) {
  const json& f = require_field(j, key, context);
  if (!f.is_number())
    throw std::runtime_error("scene file: field \"" + key + "\" in " + context +
                             " must be a number");
  return f.get<double>();
}

inline Vec2 vec2_field(const json& j, const std::string& key,
                       const std::string& context) {
  const json& f = require_field(j, key, context);
  if (!f.is_array() || f.size() != 2 || !f[0].is_number() || !f[1].is_number())
    throw std::runtime_error("scene file: field \"" + key + "\" in " + context +
                             " must be [x, y]");
  return {f[0].get<double>(), f[1].get<double>()};
}

inline json shape_to_json(const ObstacleShape& shape) {
  json j;
  if (const auto* d = std::get_if<Disc>(&shape)) {
    j["kind"] = "disc";
    j["center"] = {d->center.x, d->center.y};
    j["radius"] = d->radius;
  } else if (const auto* p = std::get_if<RegularPolygon>(&shape)) {
    j["kind"] = "regular_polygon";
    j["center"] = {p->center.x, p->center.y};
    j["circumradius"] = p->circumradius;
    j["sides"] = p->sides;
    j["rotation"] = p->rotation;
  } else if (const auto* b = std::get_if<Box>(&shape)) {
    j["kind"] = "box";
    j["center"] = {b->center.x, b->center.y};
    j["half_extents"] = {b->half_extents.x, b->half_extents.y};
    j["rotation"] = b->rotation;
  }
  return j;
}

inline ObstacleShape shape_from_json(const json& j, std::size_t index) {
  const std::string context = "obstacles[" + std::to_string(index) + "]";
  const json& kind_field = require_field(j, "kind", context);
  if (!kind_field.is_string())
    throw std::runtime_error("scene file: field \"kind\" in " + context +
                             " must be a string");
  const std::string kind = kind_field.get<std::string>();
  if (kind == "disc") {
    return Disc{vec2_field(j, "center", context),
                number_field(j, "radius", context)};
  }
  if (kind == "regular_polygon") {
    const double sides = number_field(j, "sides", context);
    return RegularPolygon{vec2_field(j, "center", context),
                          number_field(j, "circumradius", context),
                          static_cast<int>(sides),
                          number_field(j, "rotation", context)};
  }
  if (kind == "box") {
    return Box{vec2_field(j, "center", context),
               vec2_field(j, "half_extents", context),
               number_field(j, "rotation", context)};
  }
  throw std::runtime_error("scene file: unknown obstacle kind \"" + kind +
                           "\" in " + context);
}

}  // namespace detail

inline constexpr int kSceneSchemaVersion = 1;

inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["schema_version"] = kSceneSchemaVersion;
  j["name"] = scene.name;
  j["bounds"] = {{"min", {scene.bounds.min.x, scene.bounds.min.y}},
                 {"max", {scene.bounds.max.x, scene.bounds.max.y}}};
  j["start"] = {scene.start.x, scene.start.y};
  j["goal"] = {scene.goal.x, scene.goal.y};
  j["obstacles"] = nlohmann::json::array();
  for (const auto& shape : scene.obstacles)
    j["obstacles"].push_back(detail::shape_to_json(shape));
  return j;
}

inline Scene scene_from_json(const nlohmann::json& j) {
  using detail::require_field;
  const nlohmann::json& version = require_field(j, "schema_version", "document");
  if (!version.is_number_integer() || version.get<int>() != kSceneSchemaVersion)
    throw std::runtime_error("scene file: unsupported schema_version");
  Scene scene;
  const nlohmann::json& name = require_field(j, "name", "document");
  if (!name.is_string())
    throw std::runtime_error("scene file: field \"name\" must be a string");
  scene.name = name.get<std::string>();
  const nlohmann::json& bounds = require_field(j, "bounds", "document");
  scene.bounds.min = detail::vec2_field(bounds, "min", "bounds");
  scene.bounds.max = detail::vec2_field(bounds, "max", "bounds");
  scene.start = detail::vec2_field(j, "start", "document");
  scene.goal = detail::vec2_field(j, "goal", "document");
  const nlohmann::json& obstacles = require_field(j, "obstacles", "document");
  if (!obstacles.is_array())
    throw std::runtime_error("scene file: field \"obstacles\" must be an array");
  for (std::size_t i = 0; i < obstacles.size(); ++i)
    scene.obstacles.push_back(detail::shape_from_json(obstacles[i], i));

  const auto violations = validate_scene(scene);
  if (!violations.empty()) {
    std::string msg = "scene file: invalid scene:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw std::runtime_error(msg);
  }
  return scene;
}

inline void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << scene_to_json(scene).dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("scene file " + path + ": " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace skysmooth
