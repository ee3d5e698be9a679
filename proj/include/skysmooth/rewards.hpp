#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "skysmooth/geometry.hpp"

namespace skysmooth {

/// How the episode stands after a step.
enum class StepStatus { Running, Goal, Collision, OutOfBounds, Timeout };

inline const char* to_string(StepStatus s) {
  switch (s) {
    case StepStatus::Running: return "running";
    case StepStatus::Goal: return "goal";
    case StepStatus::Collision: return "collision";
    case StepStatus::OutOfBounds: return "out_of_bounds";
    case StepStatus::Timeout: return "timeout";
  }
  return "unknown";
}

/// Goal-attraction term fed to the state and reward: the scale-invariant
/// cosine form, or the absolute-distance baseline it is compared against.
enum class TowardsMode { Cosine, NegativeDistance };

/// Constants of the composite per-step reward. C2 defaults to C1 * d_hard,
/// which makes the margin field continuous at the hard-zone boundary.
struct RewardParams {
  double C1 = 2.0;
  double C2 = 1.0;
  double C3 = 2.0;
  double C4 = 2.0;
  double d_soft = 2.0;
  double d_hard = 0.5;
  double R_g = 50.0;
  double R_c = -50.0;
  // High enough that covering ground fast beats creeping toward the goal
  // while farming the per-step heading bonus under the default discount.
  double c_fwd = 5.0;
  double c_dev = 0.1;
  double eps_d = 0.01;
  bool smooth_enabled = true;
  TowardsMode towards_mode = TowardsMode::Cosine;
  double dist_scale = 10.0;
};

/// Per-step reward components; total is the exact sum of the parts.
struct RewardBreakdown {
  double margin = 0.0;
  double towards = 0.0;
  double smooth = 0.0;
  double terminal_or_flight = 0.0;
  double total = 0.0;
};

/// Standoff penalty: zero beyond the soft zone, linear ramp inside it, and
/// an inverse-distance repulsion inside the hard zone (guarded by eps_d).
inline double margin_reward(double d_obs, const RewardParams& p) {
  if (d_obs >= p.d_soft) return 0.0;
  if (d_obs >= p.d_hard)
    return -p.C1 * (p.d_soft - d_obs) / (p.d_soft - p.d_hard);
  return -p.C2 / std::max(d_obs, p.eps_d);
}

/// Cosine of the angle between the to-goal direction and the velocity;
/// zero when either vector is (near) zero.
inline double towards_reward(Vec2 v_d, Vec2 v_vel) {
  const double nd = v_d.norm();
  const double nv = v_vel.norm();
  if (nd == 0.0 || nv < 1e-6) return 0.0;
  return std::clamp(dot(v_d, v_vel) / (nd * nv), -1.0, 1.0);
}

/// Penalty on a position triple: the triangle-inequality defect (deviation
/// from collinearity) plus the norm of the discrete second difference.
/// Zero exactly when the triple is collinear and evenly spaced.
inline double smooth_reward(Vec2 p_prev, Vec2 p_curr, Vec2 p_next, double C3,
                            double C4) {
  const double defect = distance(p_curr, p_prev) + distance(p_next, p_curr) -
                        distance(p_next, p_prev);
  const double second = (p_prev - 2.0 * p_curr + p_next).norm();
  return -C3 * defect - C4 * second;
}

/// Forward-progress reward minus the deviation penalty.
inline double flight_reward(double progress_delta, double deviation,
                            const RewardParams& p) {
  return p.c_fwd * progress_delta - p.c_dev * deviation;
}

/// Everything the composite reward needs to know about one transition.
struct StepContext {
  double d_obs = 0.0;         // hull-to-surface distance at the new position
  Vec2 v_d;                   // to-goal direction at decision time
  Vec2 v_vel;                 // executed velocity
  double dist_to_goal = 0.0;  // at decision time, for the distance variant
  double progress_delta = 0.0;
  double deviation = 0.0;
  bool has_history = false;   // true once p_prev is a real past position
  Vec2 p_prev, p_curr, p_next;
};

inline RewardBreakdown total_reward(const StepContext& ctx, StepStatus status,
                                    const RewardParams& p) {
  RewardBreakdown b;
  b.margin = margin_reward(ctx.d_obs, p);
  b.towards = p.towards_mode == TowardsMode::Cosine
                  ? towards_reward(ctx.v_d, ctx.v_vel)
                  : -ctx.dist_to_goal / p.dist_scale;
  b.smooth = (p.smooth_enabled && ctx.has_history)
                 ? smooth_reward(ctx.p_prev, ctx.p_curr, ctx.p_next, p.C3, p.C4)
                 : 0.0;
  switch (status) {
    case StepStatus::Goal:
      b.terminal_or_flight = p.R_g;
      break;
    case StepStatus::Collision:
      b.terminal_or_flight = p.R_c;
      break;
    default:
      b.terminal_or_flight = flight_reward(ctx.progress_delta, ctx.deviation, p);
      break;
  }
  b.total = b.margin + b.towards + b.smooth + b.terminal_or_flight;
  return b;
}

/// Weights of the discrete contour energy.
struct SnakeEnergyParams {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Discrete contour energy: alpha * sum |first difference|^2 +
/// beta * sum |second difference|^2.
inline double snake_energy(std::span<const Vec2> points,
                           const SnakeEnergyParams& sp) {
  if (points.size() < 2)
    throw std::invalid_argument("snake_energy needs at least 2 points");
  double first = 0.0;
  for (std::size_t t = 1; t < points.size(); ++t)
    first += (points[t] - points[t - 1]).norm_sq();
  double second = 0.0;
  for (std::size_t t = 1; t + 1 < points.size(); ++t)
    second += (points[t - 1] - 2.0 * points[t] + points[t + 1]).norm_sq();
  return sp.alpha * first + sp.beta * second;
}

/// Gradient descent on the contour energy with both endpoints pinned.
/// The step is halved within an iteration whenever it would raise the
/// energy, so the returned energy never exceeds the input energy.
inline std::vector<Vec2> snake_smooth(std::vector<Vec2> points,
                                      const SnakeEnergyParams& sp,
                                      double step_size, int iterations) {
  const std::size_t n = points.size();
  if (n < 3)
    throw std::invalid_argument("snake_smooth needs at least 3 points");
  double energy = snake_energy(points, sp);
  std::vector<Vec2> grad(n), candidate(n);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t k = 1; k + 1 < n; ++k) {
      Vec2 g = sp.alpha * 2.0 * (2.0 * points[k] - points[k - 1] - points[k + 1]);
      auto d2 = [&](std::size_t t) {
        return points[t - 1] - 2.0 * points[t] + points[t + 1];
      };
      Vec2 g2;
      if (k >= 2) g2 += d2(k - 1);
      if (k + 1 < n) g2 -= 2.0 * d2(k);
      if (k + 2 < n) g2 += d2(k + 1);
      grad[k] = g + sp.beta * 2.0 * g2;
      if (!std::isfinite(grad[k].x) || !std::isfinite(grad[k].y))
        throw std::runtime_error("descent diverged; reduce step_size");
    }
    double step = step_size;
    bool moved = false;
    for (int tries = 0; tries < 60; ++tries) {
      candidate = points;
      for (std::size_t k = 1; k + 1 < n; ++k) candidate[k] -= step * grad[k];
      const double e = snake_energy(candidate, sp);
      if (!std::isfinite(e))
        throw std::runtime_error("descent diverged; reduce step_size");
      if (e <= energy) {
        points.swap(candidate);
        energy = e;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // gradient too steep at any step, already at rest
  }
  return points;
}

}  // namespace skysmooth
