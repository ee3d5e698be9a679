#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "skysmooth/config.hpp"
#include "skysmooth/plot.hpp"

using namespace skysmooth;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& stem) {
  const fs::path dir = fs::temp_directory_path() / stem;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("an empty document resolves to the documented defaults", "[config]") {
  const RunConfig rc = resolve_run_config(nlohmann::json::object(), {});
  CHECK(rc.scene == "train");
  CHECK(rc.out_dir == "runs/out");
  CHECK(rc.sim.n_rays == 32);
  CHECK(rc.sim.dt == 0.1);
  CHECK(rc.train.gamma == 0.99);
  CHECK(rc.train.seed == 0);
  CHECK(rc.rewards.C1 == 2.0);
  // continuity tie: C2 follows C1 * d_hard when not set explicitly
  CHECK(rc.rewards.C2 == Catch::Approx(rc.rewards.C1 * rc.rewards.d_hard));
  // a null document (e.g. no config file at all) behaves the same
  const RunConfig from_null = resolve_run_config(nlohmann::json(), {});
  CHECK(from_null.scene == rc.scene);
}

TEST_CASE("C2 is derived from C1 unless given explicitly", "[config]") {
  nlohmann::json doc{{"rewards", {{"C1", 4.0}}}};
  CHECK(resolve_run_config(doc, {}).rewards.C2 == Catch::Approx(2.0));

  doc["rewards"]["C2"] = 7.0;
  CHECK(resolve_run_config(doc, {}).rewards.C2 == 7.0);

  // an override counts as explicit too
  const RunConfig rc =
      resolve_run_config(nlohmann::json::object(), {"rewards.C2=9"});
  CHECK(rc.rewards.C2 == 9.0);
}

TEST_CASE("dotted-path overrides reach into every section", "[config]") {
  const RunConfig rc = resolve_run_config(
      nlohmann::json::object(),
      {"train.gamma=0.9", "sim.n_rays=16", "scene=ts2", "out_dir=/tmp/xyz",
       "train.smooth_enabled=false", "rewards.c_fwd=2.5",
       "train.depth_mode=deep"});
  CHECK(rc.train.gamma == 0.9);
  CHECK(rc.sim.n_rays == 16);
  CHECK(rc.scene == "ts2");
  CHECK(rc.out_dir == "/tmp/xyz");
  CHECK(rc.train.smooth_enabled == false);
  CHECK(rc.rewards.smooth_enabled == false);  // stamped from train
  CHECK(rc.rewards.c_fwd == 2.5);
  CHECK(rc.train.depth_mode == DepthMode::Deep);

  // overrides win over the document
  nlohmann::json doc{{"train", {{"episodes", 10}}}};
  CHECK(resolve_run_config(doc, {"train.episodes=99"}).train.episodes == 99);
}

TEST_CASE("malformed overrides are rejected", "[config]") {
  CHECK_THROWS_WITH(resolve_run_config(nlohmann::json::object(), {"justtext"}),
                    Catch::Matchers::ContainsSubstring("path=value"));
  CHECK_THROWS_WITH(resolve_run_config(nlohmann::json::object(), {"=5"}),
                    Catch::Matchers::ContainsSubstring("path=value"));
}

TEST_CASE("unknown keys are all reported at once", "[config]") {
  nlohmann::json doc{{"simm", {{"dt", 0.1}}},
                     {"train", {{"gama", 0.9}}},
                     {"scene", "train"}};
  CHECK_THROWS_WITH(
      resolve_run_config(doc, {}),
      Catch::Matchers::ContainsSubstring("unknown key") &&
          Catch::Matchers::ContainsSubstring("simm") &&
          Catch::Matchers::ContainsSubstring("train.gama"));
}

TEST_CASE("invalid values are listed together, not one at a time", "[config]") {
  nlohmann::json doc{{"sim", {{"dt", 0.0}, {"n_rays", 1}}},
                     {"rewards", {{"d_soft", 0.1}}},
                     {"train", {{"gamma", 2.0}}}};
  CHECK_THROWS_WITH(resolve_run_config(doc, {}),
                    Catch::Matchers::ContainsSubstring("sim.dt") &&
                        Catch::Matchers::ContainsSubstring("sim.n_rays") &&
                        Catch::Matchers::ContainsSubstring("d_soft") &&
                        Catch::Matchers::ContainsSubstring("gamma"));
}

TEST_CASE("the config root must be an object", "[config]") {
  CHECK_THROWS_WITH(resolve_run_config(nlohmann::json::array(), {}),
                    Catch::Matchers::ContainsSubstring("object"));
}

TEST_CASE("the environment seed is a fallback, not an override", "[config]") {
  CHECK(resolve_run_config(nlohmann::json::object(), {}, "42").train.seed ==
        42u);

  nlohmann::json doc{{"train", {{"seed", 7}}}};
  CHECK(resolve_run_config(doc, {}, "42").train.seed == 7u);

  CHECK(resolve_run_config(nlohmann::json::object(), {"train.seed=13"}, "42")
            .train.seed == 13u);

  CHECK_THROWS_WITH(resolve_run_config(nlohmann::json::object(), {}, "12x"),
                    Catch::Matchers::ContainsSubstring("SKYSMOOTH_SEED"));
}

TEST_CASE("sim parameter validation catches each bound", "[config]") {
  SimParams p;
  CHECK(validate_sim_params(p).empty());
  p.fov = 7.0;
  p.d_max_sensor = 1.0;  // below d_trunc = 5
  const auto v = validate_sim_params(p);
  REQUIRE(v.size() == 2);
  CHECK(v[0].find("fov") != std::string::npos);
  CHECK(v[1].find("d_max_sensor") != std::string::npos);
}

TEST_CASE("reward parameter validation catches each bound", "[config]") {
  RewardParams p;
  CHECK(validate_reward_params(p).empty());
  p.d_soft = 0.2;  // below d_hard = 0.5
  p.C3 = -1.0;
  const auto v = validate_reward_params(p);
  REQUIRE(v.size() == 2);
  CHECK(v[0].find("d_soft") != std::string::npos);
  CHECK(v[1].find("C1..C4") != std::string::npos);
}

TEST_CASE("towards_mode names parse and print consistently", "[config]") {
  CHECK(towards_mode_from_string("cosine") == TowardsMode::Cosine);
  CHECK(towards_mode_from_string("distance") == TowardsMode::NegativeDistance);
  CHECK_THROWS_WITH(towards_mode_from_string("euclid"),
                    Catch::Matchers::ContainsSubstring("euclid"));
  CHECK(std::string(to_string(TowardsMode::Cosine)) == "cosine");
  CHECK(std::string(to_string(TowardsMode::NegativeDistance)) == "distance");

  nlohmann::json doc{{"rewards", {{"towards_mode", "distance"}}}};
  CHECK(resolve_run_config(doc, {}).rewards.towards_mode ==
        TowardsMode::NegativeDistance);
}

TEST_CASE("config files load with path-tagged errors", "[config]") {
  const fs::path dir = fresh_dir("skysmooth_config_files");

  CHECK_THROWS_WITH(load_run_config((dir / "absent.json").string(), {}),
                    Catch::Matchers::ContainsSubstring("cannot open"));

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{ not json";
  CHECK_THROWS_WITH(load_run_config(bad.string(), {}),
                    Catch::Matchers::ContainsSubstring("bad.json"));

  const fs::path good = dir / "good.json";
  std::ofstream(good) << R"({"scene": "ts1", "train": {"episodes": 5}})";
  const RunConfig rc = load_run_config(good.string(), {});
  CHECK(rc.scene == "ts1");
  CHECK(rc.train.episodes == 5);
  fs::remove_all(dir);
}

TEST_CASE("the config echo is itself a loadable config", "[config]") {
  const fs::path dir = fresh_dir("skysmooth_config_echo");
  RunConfig rc;
  rc.scene = "ts3";
  rc.train.episodes = 123;
  rc.train.depth_mode = DepthMode::Deep;
  rc.rewards.C4 = 3.5;
  write_config_echo(rc, dir.string());

  const RunConfig back = load_run_config((dir / "config.json").string(), {});
  CHECK(back.scene == "ts3");
  CHECK(back.train.episodes == 123);
  CHECK(back.train.depth_mode == DepthMode::Deep);
  CHECK(back.rewards.C4 == 3.5);
  CHECK(back.sim.n_rays == rc.sim.n_rays);
  fs::remove_all(dir);
}

TEST_CASE("scene references resolve builtins and files but nothing else",
          "[config]") {
  CHECK(scene_from_ref("ts3").name == "ts3");
  CHECK(is_builtin_scene("train"));
  CHECK_FALSE(is_builtin_scene("ts9"));

  CHECK_THROWS_WITH(scene_from_ref("no_such_scene_anywhere"),
                    Catch::Matchers::ContainsSubstring("neither a builtin"));

  const fs::path dir = fresh_dir("skysmooth_scene_ref");
  const fs::path file = dir / "custom.json";
  save_scene(builtin_scene("ts1"), file.string());
  const Scene loaded = scene_from_ref(file.string());
  CHECK(loaded.obstacles.size() == builtin_scene("ts1").obstacles.size());
  fs::remove_all(dir);
}

TEST_CASE("scene rendering produces a well-formed standalone SVG", "[config]") {
  const Scene scene = builtin_scene("ts3");
  const std::vector<std::vector<Vec2>> trajs = {
      {{1.0, 7.5}, {3.0, 7.0}, {5.0, 6.5}, {19.0, 7.5}}};
  const std::string svg = render_svg(scene, trajs);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<circle") != std::string::npos);    // the disc obstacle
  CHECK(svg.find("<polyline") != std::string::npos);  // flown path + route
  CHECK(svg.find("NaN") == std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);

  // obstacle-free scene still renders (route + markers only)
  Scene empty;
  empty.name = "open";
  empty.bounds = {{0, 0}, {10, 10}};
  empty.start = {1, 5};
  empty.goal = {9, 5};
  const std::string bare = render_svg(empty, {});
  CHECK(bare.find("</svg>") != std::string::npos);
}

TEST_CASE("sim and reward parameters survive a JSON round trip", "[config]") {
  SimParams sp;
  sp.n_rays = 17;
  sp.d_trunc = 3.25;
  nlohmann::json js = sp;
  SimParams sp2 = js.get<SimParams>();
  CHECK(sp2.n_rays == 17);
  CHECK(sp2.d_trunc == 3.25);
  CHECK(sp2.dt == sp.dt);

  RewardParams rp;
  rp.C1 = 6.0;
  rp.towards_mode = TowardsMode::NegativeDistance;
  nlohmann::json jr = rp;
  RewardParams rp2 = jr.get<RewardParams>();
  CHECK(rp2.C1 == 6.0);
  CHECK(rp2.towards_mode == TowardsMode::NegativeDistance);
  CHECK(jr.find("smooth_enabled") == jr.end());  // lives in train, not here
}
