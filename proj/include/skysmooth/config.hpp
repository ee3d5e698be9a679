#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skysmooth/ddpg.hpp"
#include "skysmooth/rewards.hpp"
#include "skysmooth/scene.hpp"
#include "skysmooth/sim.hpp"

namespace skysmooth {

inline const char* to_string(TowardsMode m) {
  return m == TowardsMode::Cosine ? "cosine" : "distance";
}

inline TowardsMode towards_mode_from_string(const std::string& s) {
  if (s == "cosine") return TowardsMode::Cosine;
  if (s == "distance") return TowardsMode::NegativeDistance;
  throw std::invalid_argument("unknown towards_mode \"" + s +
                              "\" (expected \"cosine\" or \"distance\")");
}

inline void to_json(nlohmann::json& j, const SimParams& p) {
  j = nlohmann::json{{"dt", p.dt},
                     {"v_max", p.v_max},
                     {"uav_radius", p.uav_radius},
                     {"goal_radius", p.goal_radius},
                     {"max_steps", p.max_steps},
                     {"fov", p.fov},
                     {"n_rays", p.n_rays},
                     {"d_trunc", p.d_trunc},
                     {"d_max_sensor", p.d_max_sensor},
                     {"k_stack", p.k_stack}};
}

inline void from_json(const nlohmann::json& j, SimParams& p) {
  p.dt = j.value("dt", p.dt);
  p.v_max = j.value("v_max", p.v_max);
  p.uav_radius = j.value("uav_radius", p.uav_radius);
  p.goal_radius = j.value("goal_radius", p.goal_radius);
  p.max_steps = j.value("max_steps", p.max_steps);
  p.fov = j.value("fov", p.fov);
  p.n_rays = j.value("n_rays", p.n_rays);
  p.d_trunc = j.value("d_trunc", p.d_trunc);
  p.d_max_sensor = j.value("d_max_sensor", p.d_max_sensor);
  p.k_stack = j.value("k_stack", p.k_stack);
}

/// smooth_enabled is deliberately absent here: the ablation switch lives
/// in the train section and is stamped into the reward constants when the
/// environment is built.
inline void to_json(nlohmann::json& j, const RewardParams& p) {
  j = nlohmann::json{{"C1", p.C1},       {"C2", p.C2},
                     {"C3", p.C3},       {"C4", p.C4},
                     {"d_soft", p.d_soft}, {"d_hard", p.d_hard},
                     {"R_g", p.R_g},     {"R_c", p.R_c},
                     {"c_fwd", p.c_fwd}, {"c_dev", p.c_dev},
                     {"eps_d", p.eps_d}, {"dist_scale", p.dist_scale},
                     {"towards_mode", to_string(p.towards_mode)}};
}

inline void from_json(const nlohmann::json& j, RewardParams& p) {
  p.C1 = j.value("C1", p.C1);
  p.C2 = j.value("C2", p.C2);
  p.C3 = j.value("C3", p.C3);
  p.C4 = j.value("C4", p.C4);
  p.d_soft = j.value("d_soft", p.d_soft);
  p.d_hard = j.value("d_hard", p.d_hard);
  p.R_g = j.value("R_g", p.R_g);
  p.R_c = j.value("R_c", p.R_c);
  p.c_fwd = j.value("c_fwd", p.c_fwd);
  p.c_dev = j.value("c_dev", p.c_dev);
  p.eps_d = j.value("eps_d", p.eps_d);
  p.dist_scale = j.value("dist_scale", p.dist_scale);
  if (j.contains("towards_mode"))
    p.towards_mode =
        towards_mode_from_string(j.at("towards_mode").get<std::string>());
}

/// Everything one run needs: which scene, simulator and reward constants,
/// learner hyperparameters, and where outputs land.
struct RunConfig {
  std::string scene = "train";  // builtin name or scene-file path
  std::string out_dir = "runs/out";
  SimParams sim;
  RewardParams rewards;
  TrainConfig train;
};

inline nlohmann::json run_config_to_json(const RunConfig& rc) {
  return nlohmann::json{{"scene", rc.scene},
                        {"out_dir", rc.out_dir},
                        {"sim", rc.sim},
                        {"rewards", rc.rewards},
                        {"train", rc.train}};
}

inline std::vector<std::string> validate_sim_params(const SimParams& p) {
  std::vector<std::string> v;
  if (!(p.dt > 0.0)) v.push_back("sim.dt must be positive");
  if (!(p.v_max > 0.0)) v.push_back("sim.v_max must be positive");
  if (p.uav_radius < 0.0) v.push_back("sim.uav_radius must be >= 0");
  if (!(p.goal_radius > 0.0)) v.push_back("sim.goal_radius must be positive");
  if (p.max_steps < 1) v.push_back("sim.max_steps must be >= 1");
  if (!(p.fov > 0.0 && p.fov <= 2.0 * std::numbers::pi))
    v.push_back("sim.fov must lie in (0, 2*pi]");
  if (p.n_rays < 2) v.push_back("sim.n_rays must be >= 2");
  if (!(p.d_trunc > 0.0)) v.push_back("sim.d_trunc must be positive");
  if (!(p.d_max_sensor >= p.d_trunc))
    v.push_back("sim.d_max_sensor must be >= d_trunc");
  if (p.k_stack < 1) v.push_back("sim.k_stack must be >= 1");
  return v;
}

inline std::vector<std::string> validate_reward_params(const RewardParams& p) {
  std::vector<std::string> v;
  if (!(p.d_hard > 0.0)) v.push_back("rewards.d_hard must be positive");
  if (!(p.d_soft > p.d_hard))
    v.push_back("rewards.d_soft must exceed d_hard");
  if (!(p.eps_d > 0.0)) v.push_back("rewards.eps_d must be positive");
  if (!(p.dist_scale > 0.0)) v.push_back("rewards.dist_scale must be positive");
  if (p.C1 < 0.0 || p.C2 < 0.0 || p.C3 < 0.0 || p.C4 < 0.0)
    v.push_back("rewards.C1..C4 must be >= 0");
  return v;
}

namespace detail {

inline void check_known_keys(const nlohmann::json& doc,
                             const nlohmann::json& schema,
                             const std::string& prefix,
                             std::vector<std::string>& unknown) {
  for (const auto& [key, val] : doc.items()) {
    if (!schema.contains(key)) {
      unknown.push_back(prefix + key);
      continue;
    }
    if (val.is_object() && schema.at(key).is_object())
      check_known_keys(val, schema.at(key), prefix + key + ".", unknown);
  }
}

/// "section.field=value" applied into the config document. The value text
/// is taken as JSON when it parses (numbers, booleans), as a bare string
/// otherwise.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::runtime_error("override \"" + assignment +
                             "\" is not of the form path=value");
  std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  for (char& c : path)
    if (c == '.') c = '/';
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    parsed = value;
  }
  doc[nlohmann::json::json_pointer("/" + path)] = std::move(parsed);
}

}  // namespace detail

/// Defaults, then the config document, then dotted-path overrides, then
/// the SKYSMOOTH_SEED fallback when nothing else chose a seed. Rejects
/// unknown keys and invalid values with every problem listed.
inline RunConfig resolve_run_config(nlohmann::json doc,
                                    const std::vector<std::string>& overrides,
                                    const char* env_seed = nullptr) {
  if (doc.is_null()) doc = nlohmann::json::object();
  if (!doc.is_object())
    throw std::runtime_error("config root must be a JSON object");
  for (const std::string& ov : overrides) detail::apply_override(doc, ov);

  const bool seed_given = doc.contains("train") && doc.at("train").is_object() &&
                          doc.at("train").contains("seed");
  if (!seed_given && env_seed != nullptr) {
    char* end = nullptr;
    const unsigned long long parsed = std::strtoull(env_seed, &end, 10);
    if (end == env_seed || *end != '\0')
      throw std::runtime_error(
          std::string("SKYSMOOTH_SEED is not an unsigned integer: \"") +
          env_seed + "\"");
    doc["train"]["seed"] = static_cast<std::uint64_t>(parsed);
  }

  std::vector<std::string> unknown;
  detail::check_known_keys(doc, run_config_to_json(RunConfig{}), "", unknown);
  if (!unknown.empty()) {
    std::string msg = "config: unknown key(s):";
    for (const std::string& k : unknown) msg += " " + k;
    throw std::runtime_error(msg);
  }

  RunConfig rc;
  const bool c2_explicit = doc.contains("rewards") &&
                           doc.at("rewards").is_object() &&
                           doc.at("rewards").contains("C2");
  try {
    rc.scene = doc.value("scene", rc.scene);
    rc.out_dir = doc.value("out_dir", rc.out_dir);
    if (doc.contains("sim")) doc.at("sim").get_to(rc.sim);
    if (doc.contains("rewards")) doc.at("rewards").get_to(rc.rewards);
    if (doc.contains("train")) doc.at("train").get_to(rc.train);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
  if (!c2_explicit) rc.rewards.C2 = rc.rewards.C1 * rc.rewards.d_hard;
  rc.rewards.smooth_enabled = rc.train.smooth_enabled;

  std::vector<std::string> violations = validate_sim_params(rc.sim);
  {
    const std::vector<std::string> rv = validate_reward_params(rc.rewards);
    violations.insert(violations.end(), rv.begin(), rv.end());
  }
  try {
    validate_train_config(rc.train);
  } catch (const std::invalid_argument& e) {
    violations.push_back(e.what());
  }
  if (!violations.empty()) {
    std::string msg = "config:";
    for (const std::string& v : violations) msg += "\n  - " + v;
    throw std::runtime_error(msg);
  }
  return rc;
}

inline RunConfig load_run_config(const std::string& path,
                                 const std::vector<std::string>& overrides,
                                 const char* env_seed = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return resolve_run_config(std::move(doc), overrides, env_seed);
}

inline bool is_builtin_scene(const std::string& name) {
  return name == "train" || name == "ts1" || name == "ts2" || name == "ts3";
}

/// A builtin scene by name, or a scene file by path.
inline Scene scene_from_ref(const std::string& ref) {
  if (is_builtin_scene(ref)) return builtin_scene(ref);
  if (!std::filesystem::exists(ref))
    throw std::runtime_error(
        "scene \"" + ref +
        "\" is neither a builtin (train, ts1, ts2, ts3) nor an existing file");
  return load_scene(ref);
}

/// The resolved-config echo every command writes into its output
/// directory, making a run reconstructible from its outputs alone.
inline void write_config_echo(const RunConfig& rc, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/config.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << run_config_to_json(rc).dump(2) << "\n";
}

}  // namespace skysmooth
