#pragma once

#include <cstdio>
#include <string>
#include <variant>
#include <vector>

#include "skysmooth/geometry.hpp"
#include "skysmooth/scene.hpp"

namespace skysmooth {

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

/// Static top-down SVG of a scene: bounds, obstacles, the dashed
/// predefined route, flown trajectories, and start/goal markers.
inline std::string render_svg(const Scene& scene,
                              const std::vector<std::vector<Vec2>>& trajectories,
                              double goal_radius = 0.5) {
  const double s = 40.0;  // pixels per meter
  const double pad = 24.0;
  const double w = scene.bounds.width() * s + 2.0 * pad;
  const double h = scene.bounds.height() * s + 2.0 * pad;
  const auto X = [&](double x) { return pad + (x - scene.bounds.min.x) * s; };
  const auto Y = [&](double y) { return pad + (scene.bounds.max.y - y) * s; };
  const auto pt = [&](Vec2 p) {
    return detail::fmt2(X(p.x)) + "," + detail::fmt2(Y(p.y));
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         detail::fmt2(w) + "\" height=\"" + detail::fmt2(h) + "\" viewBox=\"0 0 " +
         detail::fmt2(w) + " " + detail::fmt2(h) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg += "<rect x=\"" + detail::fmt2(X(scene.bounds.min.x)) + "\" y=\"" +
         detail::fmt2(Y(scene.bounds.max.y)) + "\" width=\"" +
         detail::fmt2(scene.bounds.width() * s) + "\" height=\"" +
         detail::fmt2(scene.bounds.height() * s) +
         "\" fill=\"#fafafa\" stroke=\"#333333\"/>\n";

  for (const ObstacleShape& obstacle : scene.obstacles) {
    std::visit(
        [&](const auto& shape) {
          using T = std::decay_t<decltype(shape)>;
          if constexpr (std::is_same_v<T, Disc>) {
            svg += "<circle cx=\"" + detail::fmt2(X(shape.center.x)) +
                   "\" cy=\"" + detail::fmt2(Y(shape.center.y)) + "\" r=\"" +
                   detail::fmt2(shape.radius * s) +
                   "\" fill=\"#9aa7b5\" stroke=\"#5a6772\"/>\n";
          } else {
            std::vector<Vec2> corners;
            if constexpr (std::is_same_v<T, RegularPolygon>) {
              corners = polygon_vertices(shape);
            } else {
              corners = box_corners(shape);
            }
            svg += "<polygon points=\"";
            for (std::size_t i = 0; i < corners.size(); ++i) {
              if (i > 0) svg += ' ';
              svg += pt(corners[i]);
            }
            svg += "\" fill=\"#9aa7b5\" stroke=\"#5a6772\"/>\n";
          }
        },
        obstacle);
  }

  svg += "<line x1=\"" + detail::fmt2(X(scene.start.x)) + "\" y1=\"" +
         detail::fmt2(Y(scene.start.y)) + "\" x2=\"" +
         detail::fmt2(X(scene.goal.x)) + "\" y2=\"" +
         detail::fmt2(Y(scene.goal.y)) +
         "\" stroke=\"#555555\" stroke-width=\"1.5\" "
         "stroke-dasharray=\"7 6\"/>\n";

  for (const std::vector<Vec2>& traj : trajectories) {
    if (traj.size() < 2) continue;
    svg += "<polyline fill=\"none\" stroke=\"#7b2d8b\" stroke-width=\"2\" "
           "points=\"";
    for (std::size_t i = 0; i < traj.size(); ++i) {
      if (i > 0) svg += ' ';
      svg += pt(traj[i]);
    }
    svg += "\"/>\n";
  }

  svg += "<circle cx=\"" + detail::fmt2(X(scene.start.x)) + "\" cy=\"" +
         detail::fmt2(Y(scene.start.y)) +
         "\" r=\"5\" fill=\"#2f9e44\" stroke=\"#1b5e2a\"/>\n";
  svg += "<circle cx=\"" + detail::fmt2(X(scene.goal.x)) + "\" cy=\"" +
         detail::fmt2(Y(scene.goal.y)) + "\" r=\"" +
         detail::fmt2(goal_radius * s) +
         "\" fill=\"none\" stroke=\"#c92a2a\" stroke-width=\"1.5\"/>\n";
  svg += "<circle cx=\"" + detail::fmt2(X(scene.goal.x)) + "\" cy=\"" +
         detail::fmt2(Y(scene.goal.y)) +
         "\" r=\"4\" fill=\"#c92a2a\"/>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace skysmooth
