#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace skysmooth {

/// Planar vector in meters.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  bool operator==(const Vec2&) const = default;

  double norm_sq() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm_sq()); }

  /// Unit vector in the same direction; the zero vector maps to itself.
  Vec2 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{};
  }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Rotate v by angle radians about the origin.
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

struct Disc {
  Vec2 center;
  double radius = 0.0;
  bool operator==(const Disc&) const = default;
};

struct RegularPolygon {
  Vec2 center;
  double circumradius = 0.0;
  int sides = 3;
  double rotation = 0.0;
  bool operator==(const RegularPolygon&) const = default;
};

struct Box {
  Vec2 center;
  Vec2 half_extents;
  double rotation = 0.0;
  bool operator==(const Box&) const = default;
};

using ObstacleShape = std::variant<Disc, RegularPolygon, Box>;

/// Axis-aligned rectangle, min strictly below max in both axes.
struct Bounds {
  Vec2 min;
  Vec2 max;
  bool operator==(const Bounds&) const = default;

  bool contains(Vec2 p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  Vec2 center() const { return {(min.x + max.x) * 0.5, (min.y + max.y) * 0.5}; }
};

/// Vertices of a regular polygon, counter-clockwise.
inline std::vector<Vec2> polygon_vertices(const RegularPolygon& poly) {
  std::vector<Vec2> verts;
  verts.reserve(static_cast<std::size_t>(poly.sides));
  for (int i = 0; i < poly.sides; ++i) {
    const double a = poly.rotation + 2.0 * std::numbers::pi * i / poly.sides;
    verts.push_back(poly.center + Vec2{poly.circumradius * std::cos(a),
                                       poly.circumradius * std::sin(a)});
  }
  return verts;
}

/// Corners of a rotated box, counter-clockwise.
inline std::vector<Vec2> box_corners(const Box& box) {
  const Vec2 hx = rotate({box.half_extents.x, 0.0}, box.rotation);
  const Vec2 hy = rotate({0.0, box.half_extents.y}, box.rotation);
  return {box.center + hx + hy, box.center - hx + hy,
          box.center - hx - hy, box.center + hx - hy};
}

namespace detail {

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 e = b - a;
  const Vec2 w = p - a;
  const double len_sq = e.norm_sq();
  if (len_sq == 0.0) return w.norm();
  const double t = std::clamp(dot(w, e) / len_sq, 0.0, 1.0);
  return (w - e * t).norm();
}

// Exact signed distance to a convex CCW polygon: min segment distance,
// sign from the all-half-planes containment test.
inline double convex_polygon_sdf(Vec2 p, std::span<const Vec2> verts) {
  double d_min = std::numeric_limits<double>::infinity();
  bool inside = true;
  const std::size_t n = verts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = verts[i];
    const Vec2 b = verts[(i + 1) % n];
    d_min = std::min(d_min, point_segment_distance(p, a, b));
    if (cross(b - a, p - a) < 0.0) inside = false;
  }
  return inside ? -d_min : d_min;
}

}  // namespace detail

/// Signed distance from p to the shape boundary: negative inside,
/// zero on the boundary, positive outside.
inline double signed_distance(Vec2 p, const ObstacleShape& shape) {
  struct Visitor {
    Vec2 p;
    double operator()(const Disc& d) const {
      return distance(p, d.center) - d.radius;
    }
    double operator()(const RegularPolygon& poly) const {
      const auto verts = polygon_vertices(poly);
      return detail::convex_polygon_sdf(p, verts);
    }
    double operator()(const Box& box) const {
      const Vec2 q = rotate(p - box.center, -box.rotation);
      const Vec2 a{std::abs(q.x) - box.half_extents.x,
                   std::abs(q.y) - box.half_extents.y};
      const Vec2 outside{std::max(a.x, 0.0), std::max(a.y, 0.0)};
      return outside.norm() + std::min(std::max(a.x, a.y), 0.0);
    }
  };
  return std::visit(Visitor{p}, shape);
}

/// Smallest signed distance over a nonempty obstacle list and the index
/// attaining it; ties go to the lowest index.
inline std::pair<double, std::size_t> min_obstacle_distance(
    Vec2 p, std::span<const ObstacleShape> obstacles) {
  if (obstacles.empty()) throw std::invalid_argument("no obstacles");
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const double d = signed_distance(p, obstacles[i]);
    if (d < best) {
      best = d;
      best_i = i;
    }
  }
  return {best, best_i};
}

namespace detail {

inline constexpr double kRayEps = 1e-9;  // self-hit guard

// Smallest t > kRayEps with origin + t*dir on the segment ab, or infinity.
inline double ray_segment(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b) {
  const Vec2 e = b - a;
  const double denom = cross(dir, e);
  if (std::abs(denom) < 1e-15) return std::numeric_limits<double>::infinity();
  const Vec2 ao = a - origin;
  const double t = cross(ao, e) / denom;
  const double u = cross(ao, dir) / denom;
  if (t > kRayEps && u >= 0.0 && u <= 1.0) return t;
  return std::numeric_limits<double>::infinity();
}

inline double ray_circle(Vec2 origin, Vec2 dir, Vec2 center, double radius) {
  const Vec2 oc = origin - center;
  const double b = dot(dir, oc);
  const double c = oc.norm_sq() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double root = std::sqrt(disc);
  const double t1 = -b - root;
  if (t1 > kRayEps) return t1;
  const double t2 = -b + root;
  if (t2 > kRayEps) return t2;
  return std::numeric_limits<double>::infinity();
}

inline double ray_polyline_loop(Vec2 origin, Vec2 dir,
                                std::span<const Vec2> verts) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = verts.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, ray_segment(origin, dir, verts[i], verts[(i + 1) % n]));
  }
  return best;
}

inline double ray_shape(Vec2 origin, Vec2 dir, const ObstacleShape& shape) {
  struct Visitor {
    Vec2 origin, dir;
    double operator()(const Disc& d) const {
      return ray_circle(origin, dir, d.center, d.radius);
    }
    double operator()(const RegularPolygon& poly) const {
      const auto verts = polygon_vertices(poly);
      return ray_polyline_loop(origin, dir, verts);
    }
    double operator()(const Box& box) const {
      const auto corners = box_corners(box);
      return ray_polyline_loop(origin, dir, corners);
    }
  };
  return std::visit(Visitor{origin, dir}, shape);
}

}  // namespace detail

/// Distance along a unit ray to the nearest obstacle surface or bounds
/// wall, clamped to max_range. Result is always in (0, max_range].
inline double ray_cast(Vec2 origin, Vec2 dir,
                       std::span<const ObstacleShape> obstacles,
                       const Bounds& bounds, double max_range) {
  if (std::abs(dir.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("ray_cast: dir must be a unit vector");
  if (!bounds.contains(origin))
    throw std::invalid_argument("ray_cast: origin outside bounds");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& shape : obstacles) {
    best = std::min(best, detail::ray_shape(origin, dir, shape));
  }
  const Vec2 corners[4] = {{bounds.min.x, bounds.min.y},
                           {bounds.max.x, bounds.min.y},
                           {bounds.max.x, bounds.max.y},
                           {bounds.min.x, bounds.max.y}};
  for (int i = 0; i < 4; ++i) {
    best = std::min(best, detail::ray_segment(origin, dir, corners[i],
                                              corners[(i + 1) % 4]));
  }
  return std::min(best, max_range);
}

}  // namespace skysmooth
