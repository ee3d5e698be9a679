#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "skysmooth/rewards.hpp"
#include "skysmooth/rng.hpp"

using namespace skysmooth;

namespace {

RewardParams params_c1(double C1, double d_soft, double d_hard, double C2) {
  RewardParams p;
  p.C1 = C1;
  p.C2 = C2;
  p.d_soft = d_soft;
  p.d_hard = d_hard;
  return p;
}

}  // namespace

TEST_CASE("margin reward hits the pinned branch values", "[rewards]") {
  const RewardParams p = params_c1(1.0, 2.0, 0.5, 0.5);
  CHECK(margin_reward(2.0, p) == 0.0);
  CHECK(margin_reward(5.0, p) == 0.0);
  CHECK(margin_reward(1.25, p) == Catch::Approx(-0.5).margin(1e-12));
  CHECK(margin_reward(0.25, p) == Catch::Approx(-2.0).margin(1e-12));
}

TEST_CASE("margin reward is continuous at both zone boundaries", "[rewards]") {
  RewardParams p = params_c1(2.0, 2.0, 0.5, 2.0 * 0.5);  // C2 = C1*d_hard
  const double eps = 1e-9;
  CHECK(margin_reward(p.d_soft - eps, p) ==
        Catch::Approx(margin_reward(p.d_soft + eps, p)).margin(1e-7));
  CHECK(margin_reward(p.d_hard - eps, p) ==
        Catch::Approx(margin_reward(p.d_hard + eps, p)).margin(1e-7));
}

TEST_CASE("margin reward is monotone nondecreasing beyond eps_d", "[rewards]") {
  RewardParams p = params_c1(2.0, 2.0, 0.5, 1.0);
  double last = margin_reward(p.eps_d + 1e-6, p);
  for (double d = p.eps_d + 1e-3; d < 3.0; d += 1e-3) {
    const double r = margin_reward(d, p);
    CHECK(r >= last - 1e-12);
    CHECK(r <= 0.0);
    last = r;
  }
}

TEST_CASE("margin reward guards the hard-zone division", "[rewards]") {
  RewardParams p = params_c1(1.0, 2.0, 0.5, 0.5);
  CHECK(std::isfinite(margin_reward(0.0, p)));
  CHECK(margin_reward(0.0, p) == Catch::Approx(-p.C2 / p.eps_d));
  CHECK(std::isfinite(margin_reward(-0.5, p)));
}

TEST_CASE("towards reward is the cosine with the degenerate-vector guard",
          "[rewards]") {
  CHECK(towards_reward({1.0, 0.0}, {2.0, 0.0}) == Catch::Approx(1.0));
  CHECK(towards_reward({1.0, 0.0}, {0.0, 3.0}) ==
        Catch::Approx(0.0).margin(1e-12));
  CHECK(towards_reward({1.0, 0.0}, {-0.5, 0.0}) == Catch::Approx(-1.0));
  CHECK(towards_reward({0.0, 0.0}, {1.0, 0.0}) == 0.0);
  CHECK(towards_reward({1.0, 0.0}, {1e-9, 0.0}) == 0.0);
}

TEST_CASE("towards reward is invariant to rescaling either argument",
          "[rewards]") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec2 d{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    const Vec2 v{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    if (d.norm() < 1e-3 || v.norm() < 1e-3) continue;
    const double base = towards_reward(d, v);
    const double sd = rng.uniform(0.1, 50.0);
    const double sv = rng.uniform(0.1, 50.0);
    CHECK(towards_reward(d * sd, v * sv) == Catch::Approx(base).margin(1e-9));
    CHECK(base >= -1.0);
    CHECK(base <= 1.0);
  }
}

TEST_CASE("smooth reward matches the pinned triples", "[rewards]") {
  CHECK(smooth_reward({0, 0}, {1, 0}, {2, 0}, 1.0, 1.0) ==
        Catch::Approx(0.0).margin(1e-12));
  CHECK(smooth_reward({0, 0}, {1, 0}, {1, 1}, 1.0, 1.0) ==
        Catch::Approx(-2.0).margin(1e-12));
  CHECK(smooth_reward({0, 0}, {1, 0}, {3, 0}, 1.0, 1.0) ==
        Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("smooth reward is nonpositive and zero only on even collinear triples",
          "[rewards]") {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const Vec2 a{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const Vec2 b{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const Vec2 c{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    CHECK(smooth_reward(a, b, c, 2.0, 2.0) <= 1e-12);
  }
  // evenly spaced collinear triple in a random direction
  const Vec2 p0{1.3, -0.4}, dir{0.6, 0.8};
  CHECK(smooth_reward(p0, p0 + dir, p0 + 2.0 * dir, 3.0, 4.0) ==
        Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("smooth reward is rigid-motion invariant and scales linearly",
          "[rewards]") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec2 a{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const Vec2 b{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const Vec2 c{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const double base = smooth_reward(a, b, c, 1.5, 0.7);

    const Vec2 shift{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    auto move = [&](Vec2 p) { return rotate(p, angle) + shift; };
    CHECK(smooth_reward(move(a), move(b), move(c), 1.5, 0.7) ==
          Catch::Approx(base).margin(1e-9));

    const double lambda = rng.uniform(0.1, 10.0);
    CHECK(smooth_reward(a * lambda, b * lambda, c * lambda, 1.5, 0.7) ==
          Catch::Approx(base * lambda).margin(1e-9));
  }
}

TEST_CASE("flight reward combines progress and deviation linearly",
          "[rewards]") {
  RewardParams p;
  p.c_fwd = 1.0;
  p.c_dev = 1.0;
  CHECK(flight_reward(0.2, 0.0, p) == Catch::Approx(0.2));
  p.c_dev = 0.3;
  CHECK(flight_reward(0.0, 2.0, p) == Catch::Approx(-2.0 * p.c_dev));
  CHECK(flight_reward(0.0, 0.0, p) == 0.0);
}

TEST_CASE("total reward selects the terminal payout by status", "[rewards]") {
  RewardParams p;
  StepContext ctx;
  ctx.d_obs = 10.0;
  ctx.v_d = {1.0, 0.0};
  ctx.v_vel = {1.0, 0.0};
  ctx.progress_delta = 0.2;
  ctx.deviation = 0.1;
  ctx.has_history = true;
  ctx.p_prev = {0.0, 0.0};
  ctx.p_curr = {0.1, 0.0};
  ctx.p_next = {0.2, 0.0};

  CHECK(total_reward(ctx, StepStatus::Goal, p).terminal_or_flight == p.R_g);
  CHECK(total_reward(ctx, StepStatus::Collision, p).terminal_or_flight ==
        p.R_c);
  CHECK(total_reward(ctx, StepStatus::Running, p).terminal_or_flight ==
        Catch::Approx(flight_reward(ctx.progress_delta, ctx.deviation, p)));
  CHECK(total_reward(ctx, StepStatus::Timeout, p).terminal_or_flight ==
        Catch::Approx(flight_reward(ctx.progress_delta, ctx.deviation, p)));
}

TEST_CASE("total reward is the exact sum of its parts", "[rewards]") {
  Rng rng(14);
  RewardParams p;
  for (int trial = 0; trial < 200; ++trial) {
    StepContext ctx;
    ctx.d_obs = rng.uniform(0.0, 4.0);
    ctx.v_d = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    ctx.v_vel = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    ctx.dist_to_goal = rng.uniform(0.0, 20.0);
    ctx.progress_delta = rng.uniform(-0.2, 0.2);
    ctx.deviation = rng.uniform(0.0, 3.0);
    ctx.has_history = trial % 2 == 0;
    ctx.p_prev = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    ctx.p_curr = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    ctx.p_next = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto statuses = {StepStatus::Running, StepStatus::Goal,
                           StepStatus::Collision, StepStatus::OutOfBounds,
                           StepStatus::Timeout};
    for (const StepStatus st : statuses) {
      const RewardBreakdown b = total_reward(ctx, st, p);
      CHECK(b.total == b.margin + b.towards + b.smooth + b.terminal_or_flight);
    }
  }
}

TEST_CASE("smooth term is gated by history and the enable flag", "[rewards]") {
  RewardParams p;
  StepContext ctx;
  ctx.d_obs = 10.0;
  ctx.has_history = false;
  ctx.p_prev = {0.0, 0.0};
  ctx.p_curr = {1.0, 0.0};
  ctx.p_next = {1.0, 1.0};
  CHECK(total_reward(ctx, StepStatus::Running, p).smooth == 0.0);

  ctx.has_history = true;
  CHECK(total_reward(ctx, StepStatus::Running, p).smooth != 0.0);

  p.smooth_enabled = false;
  CHECK(total_reward(ctx, StepStatus::Running, p).smooth == 0.0);
}

TEST_CASE("distance-mode towards term is the scaled negative distance",
          "[rewards]") {
  RewardParams p;
  p.towards_mode = TowardsMode::NegativeDistance;
  StepContext ctx;
  ctx.d_obs = 10.0;
  ctx.dist_to_goal = 4.0;
  const RewardBreakdown b = total_reward(ctx, StepStatus::Running, p);
  CHECK(b.towards == Catch::Approx(-4.0 / p.dist_scale));
}

TEST_CASE("snake energy matches hand-computed values", "[rewards]") {
  const std::vector<Vec2> straight = {{0, 0}, {1, 0}, {2, 0}};
  CHECK(snake_energy(straight, {1.0, 1.0}) == Catch::Approx(2.0));

  const std::vector<Vec2> segment = {{0, 0}, {2, 1}};
  CHECK(snake_energy(segment, {0.7, 3.0}) == Catch::Approx(0.7 * 5.0));

  CHECK_THROWS_AS(snake_energy(std::vector<Vec2>{{0, 0}}, {1.0, 1.0}),
                  std::invalid_argument);
}

TEST_CASE("snake energy is quadratically homogeneous", "[rewards]") {
  Rng rng(15);
  std::vector<Vec2> pts;
  for (int i = 0; i < 9; ++i)
    pts.push_back({rng.uniform(-3, 3), rng.uniform(-3, 3)});
  const SnakeEnergyParams sp{1.3, 0.6};
  const double base = snake_energy(pts, sp);
  const double lambda = 2.75;
  std::vector<Vec2> scaled = pts;
  for (Vec2& p : scaled) p = p * lambda;
  CHECK(snake_energy(scaled, sp) ==
        Catch::Approx(base * lambda * lambda).margin(1e-9));
}

TEST_CASE("snake smoothing leaves a straight evenly spaced polyline alone",
          "[rewards]") {
  std::vector<Vec2> pts;
  for (int i = 0; i <= 10; ++i) pts.push_back({0.5 * i, 0.25 * i});
  const auto out = snake_smooth(pts, {1.0, 1.0}, 0.05, 50);
  REQUIRE(out.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(out[i].x == Catch::Approx(pts[i].x).margin(1e-12));
    CHECK(out[i].y == Catch::Approx(pts[i].y).margin(1e-12));
  }
}

TEST_CASE("snake smoothing strictly decreases the energy of a noisy polyline",
          "[rewards]") {
  Rng rng(16);
  std::vector<Vec2> pts;
  for (int i = 0; i <= 20; ++i)
    pts.push_back({static_cast<double>(i),
                   rng.uniform(-0.5, 0.5)});
  const SnakeEnergyParams sp{1.0, 1.0};
  const double before = snake_energy(pts, sp);
  const auto one_iter = snake_smooth(pts, sp, 0.02, 1);
  CHECK(snake_energy(one_iter, sp) < before);

  const auto many = snake_smooth(pts, sp, 0.02, 500);
  CHECK(snake_energy(many, sp) <= snake_energy(one_iter, sp));
  CHECK(many.front() == pts.front());
  CHECK(many.back() == pts.back());
}

TEST_CASE("pure stretching descent evens out spacing along the chord",
          "[rewards]") {
  // alpha-only energy: the minimizer with pinned endpoints is uniform
  // spacing on the straight chord.
  std::vector<Vec2> pts = {{0, 0}, {0.2, 1.4}, {1.9, -0.3}, {2.4, 0.9},
                           {4, 0}};
  const SnakeEnergyParams sp{1.0, 0.0};
  const auto out = snake_smooth(pts, sp, 0.05, 4000);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vec2 expect{4.0 * static_cast<double>(i) / (out.size() - 1), 0.0};
    CHECK(out[i].x == Catch::Approx(expect.x).margin(1e-3));
    CHECK(out[i].y == Catch::Approx(expect.y).margin(1e-3));
  }
}
