#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "skysmooth/metrics.hpp"
#include "skysmooth/rng.hpp"
#include "skysmooth/sim.hpp"

using namespace skysmooth;

namespace {

Trajectory circle_trajectory(double radius, int n_points) {
  Trajectory traj;
  traj.dt = 0.1;
  traj.outcome = StepStatus::Goal;
  for (int i = 0; i < n_points; ++i) {
    const double a = std::numbers::pi * i / (n_points - 1);
    traj.points.push_back({radius * std::cos(a), radius * std::sin(a)});
    traj.vels.push_back({0.0, 0.0});
  }
  return traj;
}

Trajectory straight_trajectory(int n_points, Vec2 step, double dt) {
  Trajectory traj;
  traj.dt = dt;
  traj.outcome = StepStatus::Goal;
  for (int i = 0; i < n_points; ++i) {
    traj.points.push_back({step.x * i, step.y * i});
    traj.vels.push_back(step / dt);
  }
  return traj;
}

}  // namespace

TEST_CASE("constant velocity means zero average acceleration", "[metrics]") {
  const Trajectory traj = straight_trajectory(10, {0.2, 0.1}, 0.1);
  CHECK(avg_acceleration(traj) == 0.0);
}

TEST_CASE("steady velocity increments produce the hand value", "[metrics]") {
  Trajectory traj;
  traj.dt = 0.1;
  traj.outcome = StepStatus::Goal;
  for (int i = 0; i < 8; ++i) {
    traj.points.push_back({0.0, 0.0});
    traj.vels.push_back({0.1 * i, 0.0});  // v jumps by (0.1, 0) each step
  }
  CHECK(avg_acceleration(traj) == Catch::Approx(1.0));
}

TEST_CASE("alternating unit velocities read as 20 m/s^2 at dt=0.1",
          "[metrics]") {
  Trajectory traj;
  traj.dt = 0.1;
  traj.outcome = StepStatus::Timeout;
  for (int i = 0; i < 11; ++i) {
    traj.points.push_back({0.0, 0.0});
    traj.vels.push_back({i % 2 == 0 ? 1.0 : -1.0, 0.0});
  }
  CHECK(avg_acceleration(traj) == Catch::Approx(20.0));
}

TEST_CASE("average acceleration rejects degenerate inputs", "[metrics]") {
  Trajectory traj;
  traj.dt = 0.1;
  traj.points = {{0.0, 0.0}};
  traj.vels = {{1.0, 0.0}};
  CHECK_THROWS_AS(avg_acceleration(traj), std::invalid_argument);
  Trajectory no_dt = straight_trajectory(5, {0.1, 0.0}, 0.1);
  no_dt.dt = 0.0;
  CHECK_THROWS_AS(avg_acceleration(no_dt), std::invalid_argument);
}

TEST_CASE("average acceleration is invariant to rotating the velocity path",
          "[metrics]") {
  Rng rng(41);
  Trajectory traj;
  traj.dt = 0.1;
  traj.outcome = StepStatus::Goal;
  for (int i = 0; i < 20; ++i) {
    traj.points.push_back({0.0, 0.0});
    traj.vels.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
  }
  const double base = avg_acceleration(traj);
  const double angle = 1.234;
  Trajectory rotated = traj;
  for (Vec2& v : rotated.vels) v = rotate(v, angle);
  CHECK(avg_acceleration(rotated) == Catch::Approx(base).margin(1e-9));
}

TEST_CASE("points on a circle recover its curvature exactly", "[metrics]") {
  CHECK(avg_curvature(circle_trajectory(5.0, 60)) ==
        Catch::Approx(0.2).margin(1e-6));
  CHECK(avg_curvature(circle_trajectory(1.0, 60)) ==
        Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("a straight trajectory has zero curvature", "[metrics]") {
  CHECK(avg_curvature(straight_trajectory(20, {0.2, 0.0}, 0.1)) == 0.0);
}

TEST_CASE("curvature skips degenerate triples and rejects short paths",
          "[metrics]") {
  Trajectory traj;
  traj.dt = 0.1;
  traj.points = {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};  // all sides degenerate
  traj.vels = traj.points;
  CHECK(avg_curvature(traj) == 0.0);

  Trajectory two;
  two.points = {{0.0, 0.0}, {1.0, 0.0}};
  two.vels = two.points;
  CHECK_THROWS_AS(avg_curvature(two), std::invalid_argument);
}

TEST_CASE("curvature is rigid-motion invariant and scales as 1/lambda",
          "[metrics]") {
  Rng rng(42);
  Trajectory traj;
  traj.dt = 0.1;
  for (int i = 0; i < 15; ++i) {
    traj.points.push_back(
        {0.5 * i + rng.uniform(-0.1, 0.1), rng.uniform(-0.3, 0.3)});
    traj.vels.push_back({0.0, 0.0});
  }
  const double base = avg_curvature(traj);
  REQUIRE(base > 0.0);

  Trajectory moved = traj;
  const Vec2 shift{3.0, -8.0};
  for (Vec2& p : moved.points) p = rotate(p, 0.77) + shift;
  CHECK(avg_curvature(moved) == Catch::Approx(base).margin(1e-9));

  const double lambda = 3.5;
  Trajectory scaled = traj;
  for (Vec2& p : scaled.points) p = p * lambda;
  CHECK(avg_curvature(scaled) == Catch::Approx(base / lambda).margin(1e-9));
}

TEST_CASE("success rate counts goals as integer-friendly percentages",
          "[metrics]") {
  std::vector<StepStatus> outcomes(10, StepStatus::Goal);
  CHECK(success_rate(outcomes) == 100.0);
  outcomes.assign(10, StepStatus::Collision);
  CHECK(success_rate(outcomes) == 0.0);
  outcomes.assign(10, StepStatus::Goal);
  outcomes[3] = StepStatus::Timeout;
  CHECK(success_rate(outcomes) == Catch::Approx(90.0));
  CHECK_THROWS_AS(success_rate(std::vector<StepStatus>{}),
                  std::invalid_argument);
}

TEST_CASE("collision halfway along the route reads as 50 percent CAC",
          "[metrics]") {
  // on-route flight of 5 m against a 10 m route, ending in a collision
  Trajectory traj = straight_trajectory(26, {0.2, 0.0}, 0.1);
  traj.outcome = StepStatus::Collision;
  const std::vector<Trajectory> set = {traj};
  CHECK(cac(set, 10.0) == Catch::Approx(50.0));
}

TEST_CASE("CAC caps per episode at the route length", "[metrics]") {
  // wandering flight longer than the route, no collision
  Trajectory traj = straight_trajectory(200, {0.2, 0.0}, 0.1);
  traj.outcome = StepStatus::Goal;
  const std::vector<Trajectory> set = {traj, traj};
  CHECK(cac(set, 10.0) == Catch::Approx(100.0));
}

TEST_CASE("immediate collision gives near-zero CAC", "[metrics]") {
  Trajectory traj;
  traj.dt = 0.1;
  traj.outcome = StepStatus::Collision;
  traj.points = {{0.0, 0.0}, {0.05, 0.0}};
  traj.vels = {{0.0, 0.0}, {0.5, 0.0}};
  const std::vector<Trajectory> set = {traj};
  CHECK(cac(set, 10.0) == Catch::Approx(0.5));
  CHECK(cac(set, 10.0) < 1.0);
}

TEST_CASE("CAC validates its inputs", "[metrics]") {
  CHECK_THROWS_AS(cac(std::vector<Trajectory>{}, 10.0),
                  std::invalid_argument);
  Trajectory traj = straight_trajectory(5, {0.2, 0.0}, 0.1);
  CHECK_THROWS_AS(cac(std::vector<Trajectory>{traj}, 0.0),
                  std::invalid_argument);
}

TEST_CASE("trajectory CSV parsing round-trips a simulated episode",
          "[metrics]") {
  Scene s;
  s.name = "short";
  s.bounds = {{0.0, 0.0}, {4.0, 4.0}};
  s.start = {1.0, 2.0};
  s.goal = {3.0, 2.0};
  Env env(s, SimParams{}, RewardParams{}, DepthMode::Shallow, 0);
  const std::string csv =
      run_episode_csv(env, [](const Observation& o) {
        return o.unit_to_goal * 2.0;
      });

  std::istringstream in(csv);
  const Trajectory traj = parse_trajectory_csv(in, "episode");
  CHECK(traj.outcome == StepStatus::Goal);
  CHECK(traj.dt == Catch::Approx(0.1));
  CHECK(traj.points.size() == traj.vels.size());
  CHECK(traj.points.front().x == Catch::Approx(1.0));
  CHECK(traj.points.front().y == Catch::Approx(2.0));
  // straight eastbound flight
  CHECK(avg_curvature(traj) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("trajectory CSV parsing names the file and line on errors",
          "[metrics]") {
  {
    std::istringstream in("nonsense header\n");
    CHECK_THROWS_WITH(parse_trajectory_csv(in, "bad.csv"),
                      Catch::Matchers::ContainsSubstring("bad.csv") &&
                          Catch::Matchers::ContainsSubstring("header"));
  }
  {
    std::string text = kTrajectoryCsvHeader;
    text += "\n1,2,3\n";
    std::istringstream in(text);
    CHECK_THROWS_WITH(parse_trajectory_csv(in, "bad.csv"),
                      Catch::Matchers::ContainsSubstring("bad.csv:2") &&
                          Catch::Matchers::ContainsSubstring("14 fields"));
  }
  {
    std::string text = kTrajectoryCsvHeader;
    text += "\n0,0,oops,2,0,0,1,0,0,0,0,0,0,running\n";
    std::istringstream in(text);
    CHECK_THROWS_WITH(parse_trajectory_csv(in, "bad.csv"),
                      Catch::Matchers::ContainsSubstring("bad number"));
  }
  {
    std::string text = kTrajectoryCsvHeader;
    text += "\n";
    std::istringstream in(text);
    CHECK_THROWS_WITH(parse_trajectory_csv(in, "bad.csv"),
                      Catch::Matchers::ContainsSubstring("no trajectory rows"));
  }
}

TEST_CASE("aggregate report recounts mixed outcomes and contributing sizes",
          "[metrics]") {
  Trajectory ok = straight_trajectory(30, {0.2, 0.0}, 0.1);
  ok.outcome = StepStatus::Goal;
  Trajectory crash = straight_trajectory(10, {0.2, 0.0}, 0.1);
  crash.outcome = StepStatus::Collision;
  Trajectory stubby;  // too short for curvature and acceleration
  stubby.dt = 0.1;
  stubby.outcome = StepStatus::Timeout;
  stubby.points = {{0.0, 0.0}, {0.1, 0.0}};
  stubby.vels = {{1.0, 0.0}, {1.0, 0.0}};

  const std::vector<Trajectory> trajs = {ok, crash, stubby};
  const MetricsReport rep = aggregate_report(trajs, 5.8);
  CHECK(rep.n_episodes == 3);
  CHECK(rep.sr == Catch::Approx(100.0 / 3.0));
  CHECK(rep.n_cur == 2);
  CHECK(rep.n_acc == 3);
  CHECK(rep.avg_cur == 0.0);
  CHECK(rep.cac <= 100.0);

  // single straight successful flight: zero curvature, full success
  const MetricsReport solo = aggregate_report({ok}, 5.8);
  CHECK(solo.sr == 100.0);
  CHECK(solo.avg_cur == 0.0);
  CHECK(solo.cac == 100.0);
}

TEST_CASE("trajectory directories load sorted and reject junk", "[metrics]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "skysmooth_metrics_dir";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto write_episode = [&](const std::string& fname, double speed) {
    Scene s;
    s.name = "short";
    s.bounds = {{0.0, 0.0}, {4.0, 4.0}};
    s.start = {1.0, 2.0};
    s.goal = {3.0, 2.0};
    Env env(s, SimParams{}, RewardParams{}, DepthMode::Shallow, 0);
    std::ofstream out(dir / fname);
    out << run_episode_csv(env, [=](const Observation& o) {
      return o.unit_to_goal * speed;
    });
  };
  write_episode("ep_0000.csv", 2.0);
  write_episode("ep_0001.csv", 1.0);
  {
    std::ofstream out(dir / "report.csv");
    out << "avg_acc,avg_cur,sr,cac,n_episodes\n0,0,0,0,0\n";
  }
  {
    std::ofstream out(dir / "notes.txt");
    out << "not a trajectory\n";
  }

  const auto trajs = load_trajectory_dir(dir.string());
  CHECK(trajs.size() == 2);  // report.csv and notes.txt skipped

  {
    std::ofstream out(dir / "ep_0002.csv");
    out << "garbage\n";
  }
  CHECK_THROWS_WITH(load_trajectory_dir(dir.string()),
                    Catch::Matchers::ContainsSubstring("ep_0002.csv"));

  fs::remove_all(dir);
  CHECK_THROWS_AS(load_trajectory_dir(dir.string()), std::runtime_error);
}

TEST_CASE("report serialization carries every headline number", "[metrics]") {
  MetricsReport rep;
  rep.avg_acc = 0.125;
  rep.avg_cur = 0.5;
  rep.sr = 90.0;
  rep.cac = 87.33;
  rep.cac_meters = 37.55;
  rep.n_episodes = 50;
  rep.n_acc = 49;
  rep.n_cur = 48;

  const auto j = report_to_json(rep);
  CHECK(j.at("schema_version") == 1);
  CHECK(j.at("sr") == 90.0);
  CHECK(j.at("cac") == 87.33);
  CHECK(j.at("cac_meters") == 37.55);
  CHECK(j.at("n_acc") == 49);

  const std::string csv = report_to_csv(rep);
  CHECK(csv.find("avg_acc,avg_cur,sr,cac,n_episodes\n") == 0);
  CHECK(csv.find("90") != std::string::npos);
  CHECK(csv.find("87.33") != std::string::npos);
  CHECK(csv.find("50") != std::string::npos);
}
