#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "skysmooth/geometry.hpp"
#include "skysmooth/rewards.hpp"
#include "skysmooth/scene.hpp"

namespace skysmooth {

/// Whether observations carry the raw sensor depth or the truncated
/// shallow depth that ignores far obstacles.
enum class DepthMode { Deep, Shallow };

inline const char* to_string(DepthMode m) {
  return m == DepthMode::Deep ? "deep" : "shallow";
}

struct SimParams {
  double dt = 0.1;
  double v_max = 2.0;
  double uav_radius = 0.3;
  double goal_radius = 0.5;
  int max_steps = 500;
  double fov = std::numbers::pi / 2.0;
  int n_rays = 32;
  double d_trunc = 5.0;       // shallow-depth cap
  double d_max_sensor = 20.0;
  int k_stack = 4;            // stacked depth frames
};

struct UavState {
  Vec2 pos;
  Vec2 vel;
  double heading = 0.0;
};

/// One rendered view: ray distances across the field of view.
struct DepthFrame {
  std::vector<double> rays;
};

/// Agent state: stacked depth frames (oldest first), current velocity,
/// and the unit vector toward the goal. dist_to_goal carries the absolute
/// distance for the non-scale-invariant baseline variant.
struct Observation {
  std::vector<DepthFrame> depth_stack;
  Vec2 vel;
  Vec2 unit_to_goal;
  double dist_to_goal = 0.0;
};

struct StepInfo {
  double d_obs = 0.0;
  double deviation = 0.0;
  double progress_delta = 0.0;
};

struct StepResult {
  Observation obs;
  RewardBreakdown reward;
  StepStatus status = StepStatus::Running;
  StepInfo info;
};

/// Unit vector from pos to goal; the zero vector once inside goal_radius.
inline Vec2 unit_to_goal(Vec2 pos, Vec2 goal, double goal_radius) {
  const Vec2 d = goal - pos;
  const double n = d.norm();
  if (n <= goal_radius) return {};
  return d / n;
}

/// n_rays ray casts fanned across fov about heading, clamped to the
/// sensor range.
inline DepthFrame render_depth(const Scene& scene, Vec2 pos, double heading,
                               const SimParams& params) {
  DepthFrame frame;
  frame.rays.resize(static_cast<std::size_t>(params.n_rays));
  for (int r = 0; r < params.n_rays; ++r) {
    const double angle =
        heading - params.fov / 2.0 + params.fov * r / (params.n_rays - 1);
    const Vec2 dir{std::cos(angle), std::sin(angle)};
    frame.rays[static_cast<std::size_t>(r)] = ray_cast(
        pos, dir, scene.obstacles, scene.bounds, params.d_max_sensor);
  }
  return frame;
}

/// Clamp every ray at d_trunc; idempotent.
inline DepthFrame truncate_depth(DepthFrame frame, double d_trunc) {
  if (!(d_trunc > 0.0))
    throw std::invalid_argument("truncate_depth: d_trunc must be positive");
  for (double& r : frame.rays) r = std::min(r, d_trunc);
  return frame;
}

/// Episode environment. Owns the UAV state and produces observations,
/// rewards, and termination statuses; stepped sequentially by one caller.
class Env {
 public:
  Env(Scene scene, SimParams params, RewardParams reward_params,
      DepthMode depth_mode, std::uint64_t seed)
      : scene_(std::move(scene)),
        params_(params),
        reward_params_(reward_params),
        depth_mode_(depth_mode),
        seed_(seed) {
    const auto violations = validate_scene(scene_);
    if (!violations.empty()) {
      std::string msg = "invalid scene:";
      for (const auto& v : violations) msg += "\n  - " + v;
      throw std::invalid_argument(msg);
    }
    reset();
  }

  /// Back to the start of a fresh episode; deterministic.
  const Observation& reset() {
    uav_.pos = scene_.start;
    uav_.vel = {};
    uav_.heading = std::atan2(scene_.goal.y - scene_.start.y,
                              scene_.goal.x - scene_.start.x);
    status_ = StepStatus::Running;
    step_count_ = 0;
    prev_pos_ = {};
    const DepthFrame frame = sensed_depth(uav_.pos, uav_.heading);
    obs_.depth_stack.assign(static_cast<std::size_t>(params_.k_stack), frame);
    obs_.vel = uav_.vel;
    obs_.unit_to_goal = unit_to_goal(uav_.pos, scene_.goal, params_.goal_radius);
    obs_.dist_to_goal = distance(uav_.pos, scene_.goal);
    info_.d_obs = hull_distance(uav_.pos);
    info_.deviation = project_onto_route(scene_, uav_.pos).deviation;
    info_.progress_delta = 0.0;
    return obs_;
  }

  /// Advance one control interval with a commanded velocity.
  StepResult step(Vec2 action) {
    if (status_ != StepStatus::Running)
      throw std::runtime_error("episode ended");
    if (!std::isfinite(action.x) || !std::isfinite(action.y))
      throw std::invalid_argument("step: action must be finite");

    const double norm = action.norm();
    if (norm > params_.v_max) action = action * (params_.v_max / norm);

    const Vec2 old_pos = uav_.pos;
    const double old_s = project_onto_route(scene_, old_pos).s;
    const Vec2 v_d = unit_to_goal(old_pos, scene_.goal, params_.goal_radius);
    const double old_dist = distance(old_pos, scene_.goal);

    uav_.vel = action;
    uav_.pos += uav_.vel * params_.dt;
    if (uav_.vel.norm() > 1e-6)
      uav_.heading = std::atan2(uav_.vel.y, uav_.vel.x);
    step_count_ += 1;

    const double d_obs = hull_distance(uav_.pos);
    if (d_obs <= 0.0)
      status_ = StepStatus::Collision;
    else if (distance(uav_.pos, scene_.goal) <= params_.goal_radius)
      status_ = StepStatus::Goal;
    else if (!scene_.bounds.contains(uav_.pos))
      status_ = StepStatus::OutOfBounds;
    else if (step_count_ >= params_.max_steps)
      status_ = StepStatus::Timeout;

    const RouteFrame route = project_onto_route(scene_, uav_.pos);
    StepContext ctx;
    ctx.d_obs = d_obs;
    ctx.v_d = v_d;
    ctx.v_vel = uav_.vel;
    ctx.dist_to_goal = old_dist;
    ctx.progress_delta = route.s - old_s;
    ctx.deviation = route.deviation;
    ctx.has_history = step_count_ >= 2;
    ctx.p_prev = prev_pos_;
    ctx.p_curr = old_pos;
    ctx.p_next = uav_.pos;
    const RewardBreakdown reward = total_reward(ctx, status_, reward_params_);

    // render from the new pose; when it left the bounds, keep the last view
    DepthFrame frame = scene_.bounds.contains(uav_.pos)
                           ? sensed_depth(uav_.pos, uav_.heading)
                           : obs_.depth_stack.back();
    obs_.depth_stack.erase(obs_.depth_stack.begin());
    obs_.depth_stack.push_back(std::move(frame));
    obs_.vel = uav_.vel;
    obs_.unit_to_goal = unit_to_goal(uav_.pos, scene_.goal, params_.goal_radius);
    obs_.dist_to_goal = distance(uav_.pos, scene_.goal);

    prev_pos_ = old_pos;
    info_ = {d_obs, route.deviation, ctx.progress_delta};
    return StepResult{obs_, reward, status_, info_};
  }

  const Scene& scene() const { return scene_; }
  const SimParams& params() const { return params_; }
  const UavState& state() const { return uav_; }
  const Observation& observation() const { return obs_; }
  StepStatus status() const { return status_; }
  int steps() const { return step_count_; }
  const StepInfo& info() const { return info_; }
  std::uint64_t seed() const { return seed_; }

 private:
  double hull_distance(Vec2 p) const {
    if (scene_.obstacles.empty())
      return std::numeric_limits<double>::infinity();
    return min_obstacle_distance(p, scene_.obstacles).first - params_.uav_radius;
  }

  DepthFrame sensed_depth(Vec2 pos, double heading) const {
    DepthFrame frame = render_depth(scene_, pos, heading, params_);
    if (depth_mode_ == DepthMode::Shallow)
      frame = truncate_depth(std::move(frame), params_.d_trunc);
    return frame;
  }

  Scene scene_;
  SimParams params_;
  RewardParams reward_params_;
  DepthMode depth_mode_;
  std::uint64_t seed_;
  UavState uav_;
  Observation obs_;
  StepStatus status_ = StepStatus::Running;
  int step_count_ = 0;
  Vec2 prev_pos_;
  StepInfo info_;
};

inline constexpr const char* kTrajectoryCsvHeader =
    "step,t,x,y,vx,vy,d_obs,deviation,r_margin,r_towards,r_smooth,r_flight,"
    "r_total,status";

namespace detail {

inline void append_g17(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace detail

/// One trajectory-log row; step 0 carries the initial state with zero
/// rewards.
inline void append_trajectory_row(std::string& out, int step, double dt,
                                  const UavState& s, const StepInfo& info,
                                  const RewardBreakdown& r, StepStatus status) {
  out += std::to_string(step);
  out += ',';
  detail::append_g17(out, step * dt);
  for (const double v : {s.pos.x, s.pos.y, s.vel.x, s.vel.y, info.d_obs,
                         info.deviation, r.margin, r.towards, r.smooth,
                         r.terminal_or_flight, r.total}) {
    out += ',';
    detail::append_g17(out, v);
  }
  out += ',';
  out += to_string(status);
  out += '\n';
}

/// Full trajectory log for one episode, starting from the current env
/// state. Actions come from the policy callback; returns the CSV text.
template <typename PolicyFn>
std::string run_episode_csv(Env& env, PolicyFn&& policy) {
  std::string csv = kTrajectoryCsvHeader;
  csv += '\n';
  env.reset();
  const double dt = env.params().dt;
  append_trajectory_row(csv, 0, dt, env.state(), env.info(), RewardBreakdown{},
                        StepStatus::Running);
  int step = 0;
  while (env.status() == StepStatus::Running) {
    const Vec2 action = policy(env.observation());
    const StepResult res = env.step(action);
    step += 1;
    append_trajectory_row(csv, step, dt, env.state(), res.info, res.reward,
                          res.status);
  }
  return csv;
}

}  // namespace skysmooth
