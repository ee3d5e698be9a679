// Batch command-line front end: train, eval, metrics, plot, scene,
// gradcheck. Non-interactive by design; every run writes a resolved
// config echo so its outputs are self-describing.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skysmooth/skysmooth.hpp"

namespace fs = std::filesystem;
using namespace skysmooth;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;

struct CommonArgs {
  std::string config_path;
  std::string scene;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

/// Dedicated flags become overrides applied after --set, so they win.
RunConfig resolve_from(const CommonArgs& args) {
  std::vector<std::string> overrides = args.overrides;
  if (!args.scene.empty()) overrides.push_back("scene=" + args.scene);
  if (!args.out_dir.empty()) overrides.push_back("out_dir=" + args.out_dir);
  if (args.seed_given)
    overrides.push_back("train.seed=" + std::to_string(args.seed));
  const char* env_seed = std::getenv("SKYSMOOTH_SEED");
  if (args.config_path.empty())
    return resolve_run_config(nlohmann::json::object(), overrides, env_seed);
  return load_run_config(args.config_path, overrides, env_seed);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

int cmd_train(const CommonArgs& args) {
  RunConfig rc;
  Scene scene;
  try {
    rc = resolve_from(args);
    scene = scene_from_ref(rc.scene);
    write_config_echo(rc, rc.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    TrainResult result = train(scene, rc.sim, rc.rewards, rc.train);
    write_text(rc.out_dir + "/train_log.csv", result.log_csv);
    save_policy(result.policy, rc.out_dir + "/policy.ckpt");
    std::cout << "trained " << result.episodes_run << " episodes on scene \""
              << scene.name << "\"";
    if (result.final_eval_sr >= 0.0)
      std::cout << "; last greedy probe success rate " << result.final_eval_sr
                << "%";
    std::cout << "\noutputs in " << rc.out_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  }
}

int cmd_eval(const CommonArgs& args, const std::string& policy_path,
             int episodes) {
  try {
    RunConfig rc = resolve_from(args);
    const Scene scene = scene_from_ref(rc.scene);
    Policy policy = load_policy(policy_path);
    if (policy.n_rays != rc.sim.n_rays || policy.k_stack != rc.sim.k_stack)
      throw std::runtime_error(
          "policy was trained with n_rays=" + std::to_string(policy.n_rays) +
          ", k_stack=" + std::to_string(policy.k_stack) +
          " but the config asks for n_rays=" + std::to_string(rc.sim.n_rays) +
          ", k_stack=" + std::to_string(rc.sim.k_stack));
    if (episodes < 1) throw std::runtime_error("--episodes must be >= 1");

    rc.rewards.smooth_enabled = policy.cfg.smooth_enabled;
    rc.train = policy.cfg;
    write_config_echo(rc, rc.out_dir);

    Env env(scene, rc.sim, rc.rewards, policy.cfg.depth_mode, rc.train.seed);
    const auto greedy = [&policy](const Observation& obs) {
      return greedy_action(policy, obs);
    };
    for (int e = 0; e < episodes; ++e) {
      char name[32];
      std::snprintf(name, sizeof(name), "/ep_%04d.csv", e);
      write_text(rc.out_dir + name, run_episode_csv(env, greedy));
    }
    const std::vector<Trajectory> trajs = load_trajectory_dir(rc.out_dir);
    const MetricsReport report = aggregate_report(trajs, route_length(scene));
    const std::string report_json = report_to_json(report).dump(2) + "\n";
    write_text(rc.out_dir + "/report.json", report_json);
    write_text(rc.out_dir + "/report.csv", report_to_csv(report));
    std::cout << report_json;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

/// Scene reference for a trajectory directory: the --scene flag, else the
/// config echo sitting next to the trajectories.
std::string scene_ref_for_dir(const std::string& dir,
                              const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  const std::string echo = dir + "/config.json";
  std::ifstream in(echo);
  if (!in)
    throw std::runtime_error("no --scene given and no config echo at " + echo);
  try {
    return nlohmann::json::parse(in).at("scene").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(echo + ": " + e.what());
  }
}

int cmd_metrics(const std::string& dir, const std::string& scene_flag) {
  try {
    const Scene scene = scene_from_ref(scene_ref_for_dir(dir, scene_flag));
    const MetricsReport report =
        aggregate_report(load_trajectory_dir(dir), route_length(scene));
    std::cout << report_to_json(report).dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int cmd_plot(const std::string& input, const std::string& scene_flag,
             const std::string& out_path) {
  try {
    std::vector<Trajectory> trajs;
    std::string echo_dir;
    if (fs::is_directory(input)) {
      trajs = load_trajectory_dir(input);
      echo_dir = input;
    } else if (fs::is_regular_file(input)) {
      trajs.push_back(load_trajectory(input));
      echo_dir = fs::path(input).parent_path().string();
      if (echo_dir.empty()) echo_dir = ".";
    } else {
      throw std::runtime_error("no trajectory file or directory at " + input);
    }
    const Scene scene = scene_from_ref(scene_ref_for_dir(echo_dir, scene_flag));
    std::vector<std::vector<Vec2>> polylines;
    polylines.reserve(trajs.size());
    for (const Trajectory& t : trajs) polylines.push_back(t.points);
    write_text(out_path, render_svg(scene, polylines));
    std::cout << "wrote " << out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int cmd_scene(const std::string& name, const std::string& out_path) {
  try {
    save_scene(builtin_scene(name), out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int cmd_gradcheck() {
  const GradCheckReport report = run_gradcheck_suite();
  for (const GradCheckCase& c : report.cases)
    std::printf("%-24s max relative error %.3e\n", c.name.c_str(), c.rel_err);
  std::printf("worst                    %.3e (tolerance 1e-4)\n", report.worst);
  return report.worst < 1e-4 ? 0 : 1;
}

void add_common(CLI::App* sub, CommonArgs& args, bool with_out) {
  sub->add_option("--config", args.config_path,
                  "JSON run-config file (defaults apply without one)");
  sub->add_option("--scene", args.scene,
                  "scene: builtin name (train, ts1, ts2, ts3) or file path");
  if (with_out) sub->add_option("--out", args.out_dir, "output directory");
  sub->add_option("--seed", args.seed, "RNG seed (SKYSMOOTH_SEED as fallback)")
      ->each([&args](const std::string&) { args.seed_given = true; });
  sub->add_option("--set", args.overrides,
                  "dotted-path config override, e.g. --set rewards.C3=1.0")
      ->take_all();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D UAV collision-avoidance learning laboratory"};
  app.require_subcommand(1);

  CommonArgs train_args;
  std::string smooth;
  int train_episodes = -1;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a policy on a scene");
  add_common(train_cmd, train_args, true);
  train_cmd->add_option("--episodes", train_episodes, "training episodes");
  train_cmd->add_option("--smooth", smooth, "smoothness reward term: on|off")
      ->check(CLI::IsMember({"on", "off"}));

  CommonArgs eval_args;
  std::string policy_path;
  int eval_episodes = 100;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "run greedy episodes and score them");
  add_common(eval_cmd, eval_args, true);
  eval_cmd->add_option("--policy", policy_path, "policy checkpoint")
      ->required();
  eval_cmd->add_option("--episodes", eval_episodes, "evaluation episodes");

  std::string metrics_dir, metrics_scene;
  CLI::App* metrics_cmd = app.add_subcommand(
      "metrics", "aggregate metrics over a directory of trajectory CSVs");
  metrics_cmd->add_option("dir", metrics_dir, "trajectory directory")
      ->required();
  metrics_cmd->add_option("--scene", metrics_scene,
                          "scene override (else read from the config echo)");

  std::string plot_input, plot_scene, plot_out;
  CLI::App* plot_cmd =
      app.add_subcommand("plot", "render trajectories over the scene as SVG");
  plot_cmd->add_option("input", plot_input, "trajectory CSV or directory")
      ->required();
  plot_cmd->add_option("--scene", plot_scene,
                       "scene override (else read from the config echo)");
  plot_cmd->add_option("--out", plot_out, "output SVG path")->required();

  std::string scene_name, scene_out;
  CLI::App* scene_cmd =
      app.add_subcommand("scene", "write a builtin scene to a JSON file");
  scene_cmd->add_option("name", scene_name, "builtin scene name")->required();
  scene_cmd->add_option("out", scene_out, "output path")->required();

  CLI::App* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "finite-difference check of every analytic gradient");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand(train_cmd)) {
    if (train_episodes >= 0)
      train_args.overrides.push_back("train.episodes=" +
                                     std::to_string(train_episodes));
    if (!smooth.empty())
      train_args.overrides.push_back(
          std::string("train.smooth_enabled=") +
          (smooth == "on" ? "true" : "false"));
    return cmd_train(train_args);
  }
  if (app.got_subcommand(eval_cmd))
    return cmd_eval(eval_args, policy_path, eval_episodes);
  if (app.got_subcommand(metrics_cmd))
    return cmd_metrics(metrics_dir, metrics_scene);
  if (app.got_subcommand(plot_cmd))
    return cmd_plot(plot_input, plot_scene, plot_out);
  if (app.got_subcommand(scene_cmd)) return cmd_scene(scene_name, scene_out);
  if (app.got_subcommand(gradcheck_cmd)) return cmd_gradcheck();
  return kExitConfig;
}
