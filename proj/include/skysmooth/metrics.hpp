#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skysmooth/geometry.hpp"
#include "skysmooth/rewards.hpp"
#include "skysmooth/sim.hpp"

namespace skysmooth {

/// One flown episode as the metrics see it.
struct Trajectory {
  std::vector<Vec2> points;
  std::vector<Vec2> vels;
  double dt = 0.0;
  StepStatus outcome = StepStatus::Running;
};

struct MetricsReport {
  double avg_acc = 0.0;   // m/s^2
  double avg_cur = 0.0;   // 1/m
  double sr = 0.0;        // percent
  double cac = 0.0;       // percent of route length
  int n_episodes = 0;
  // episodes that contributed to each averaged metric
  int n_acc = 0;
  int n_cur = 0;
  double cac_meters = 0.0;  // mean flown length before first collision
};

/// Mean magnitude of the discrete acceleration |dv| / dt.
inline double avg_acceleration(const Trajectory& traj) {
  if (traj.vels.size() < 2)
    throw std::invalid_argument("avg_acceleration needs at least 2 samples");
  if (!(traj.dt > 0.0))
    throw std::invalid_argument("avg_acceleration needs dt > 0");
  double sum = 0.0;
  for (std::size_t t = 1; t < traj.vels.size(); ++t)
    sum += (traj.vels[t] - traj.vels[t - 1]).norm() / traj.dt;
  return sum / static_cast<double>(traj.vels.size() - 1);
}

/// Menger curvature of a point triple: 4 * area / product of side lengths.
inline double menger_curvature(Vec2 a, Vec2 b, Vec2 c) {
  const double ab = distance(a, b);
  const double bc = distance(b, c);
  const double ca = distance(c, a);
  return 2.0 * std::abs(cross(b - a, c - a)) / (ab * bc * ca);
}

/// Mean Menger curvature over consecutive triples; triples with a
/// degenerate side are skipped, and an all-degenerate path reads as 0.
inline double avg_curvature(const Trajectory& traj) {
  if (traj.points.size() < 3)
    throw std::invalid_argument("avg_curvature needs at least 3 points");
  double sum = 0.0;
  int n = 0;
  for (std::size_t t = 1; t + 1 < traj.points.size(); ++t) {
    const Vec2 a = traj.points[t - 1];
    const Vec2 b = traj.points[t];
    const Vec2 c = traj.points[t + 1];
    if (distance(a, b) < 1e-6 || distance(b, c) < 1e-6 || distance(c, a) < 1e-6)
      continue;
    sum += menger_curvature(a, b, c);
    n += 1;
  }
  return n > 0 ? sum / n : 0.0;
}

/// Percentage of episodes that reached the goal.
inline double success_rate(std::span<const StepStatus> outcomes) {
  if (outcomes.empty())
    throw std::invalid_argument("success_rate needs at least one episode");
  const auto goals = std::count(outcomes.begin(), outcomes.end(), StepStatus::Goal);
  return 100.0 * static_cast<double>(goals) /
         static_cast<double>(outcomes.size());
}

inline double flown_length(const Trajectory& traj) {
  double len = 0.0;
  for (std::size_t t = 1; t < traj.points.size(); ++t)
    len += distance(traj.points[t], traj.points[t - 1]);
  return len;
}

/// Mean flown length before the first collision (the full flight when none
/// happened), as a percentage of the route length, capped per episode at
/// 100.
inline double cac(std::span<const Trajectory> trajectories,
                  double route_length) {
  if (trajectories.empty())
    throw std::invalid_argument("cac needs at least one episode");
  if (!(route_length > 0.0))
    throw std::invalid_argument("cac needs route_length > 0");
  double sum = 0.0;
  for (const Trajectory& traj : trajectories)
    sum += std::min(flown_length(traj), route_length) / route_length;
  return 100.0 * sum / static_cast<double>(trajectories.size());
}

inline StepStatus status_from_string(const std::string& s) {
  if (s == "running") return StepStatus::Running;
  if (s == "goal") return StepStatus::Goal;
  if (s == "collision") return StepStatus::Collision;
  if (s == "out_of_bounds") return StepStatus::OutOfBounds;
  if (s == "timeout") return StepStatus::Timeout;
  throw std::runtime_error("unknown status \"" + s + "\"");
}

/// Parse a trajectory log produced by the simulator.
inline Trajectory parse_trajectory_csv(std::istream& in,
                                       const std::string& name) {
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryCsvHeader)
    throw std::runtime_error(name + ": bad or missing trajectory header");
  Trajectory traj;
  std::vector<double> times;
  int lineno = 1;
  while (std::getline(in, line)) {
    lineno += 1;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 14)
      throw std::runtime_error(name + ":" + std::to_string(lineno) +
                               ": expected 14 fields, got " +
                               std::to_string(fields.size()));
    auto num = [&](int idx) {
      char* end = nullptr;
      const double v = std::strtod(fields[idx].c_str(), &end);
      if (end == fields[idx].c_str())
        throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                 ": bad number \"" + fields[idx] + "\"");
      return v;
    };
    times.push_back(num(1));
    traj.points.push_back({num(2), num(3)});
    traj.vels.push_back({num(4), num(5)});
    traj.outcome = status_from_string(fields[13]);
  }
  if (traj.points.empty())
    throw std::runtime_error(name + ": no trajectory rows");
  if (times.size() >= 2) traj.dt = times[1] - times[0];
  return traj;
}

inline Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_trajectory_csv(in, path);
}

/// All four headline metrics over every trajectory CSV in a directory.
/// Per-metric entries undefined for a trajectory (too short) are skipped
/// and the contributing counts reported.
inline MetricsReport aggregate_report(const std::vector<Trajectory>& trajs,
                                      double route_length) {
  if (trajs.empty())
    throw std::invalid_argument("aggregate_report needs at least one episode");
  MetricsReport rep;
  rep.n_episodes = static_cast<int>(trajs.size());
  std::vector<StepStatus> outcomes;
  double acc_sum = 0.0, cur_sum = 0.0, len_sum = 0.0, cac_sum = 0.0;
  for (const Trajectory& traj : trajs) {
    outcomes.push_back(traj.outcome);
    if (traj.vels.size() >= 2 && traj.dt > 0.0) {
      acc_sum += avg_acceleration(traj);
      rep.n_acc += 1;
    }
    if (traj.points.size() >= 3) {
      cur_sum += avg_curvature(traj);
      rep.n_cur += 1;
    }
    const double len = flown_length(traj);
    len_sum += len;
    cac_sum += std::min(len, route_length) / route_length;
  }
  rep.avg_acc = rep.n_acc > 0 ? acc_sum / rep.n_acc : 0.0;
  rep.avg_cur = rep.n_cur > 0 ? cur_sum / rep.n_cur : 0.0;
  rep.sr = success_rate(outcomes);
  rep.cac = 100.0 * cac_sum / static_cast<double>(trajs.size());
  rep.cac_meters = len_sum / static_cast<double>(trajs.size());
  return rep;
}

/// Trajectory CSVs of one evaluation directory, sorted by filename.
/// The summary files (report.*) are not trajectories and are skipped.
inline std::vector<Trajectory> load_trajectory_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string fname = entry.path().filename().string();
    if (entry.path().extension() == ".csv" && fname != "report.csv")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::runtime_error("no trajectory CSV files in " + dir);
  std::vector<Trajectory> trajs;
  trajs.reserve(files.size());
  for (const auto& f : files) trajs.push_back(load_trajectory(f));
  return trajs;
}

inline nlohmann::json report_to_json(const MetricsReport& rep) {
  return nlohmann::json{{"schema_version", 1},
                        {"n_episodes", rep.n_episodes},
                        {"sr", rep.sr},
                        {"cac", rep.cac},
                        {"cac_meters", rep.cac_meters},
                        {"avg_acc", rep.avg_acc},
                        {"avg_cur", rep.avg_cur},
                        {"n_acc", rep.n_acc},
                        {"n_cur", rep.n_cur}};
}

/// One-row CSV for table assembly.
inline std::string report_to_csv(const MetricsReport& rep) {
  std::string csv = "avg_acc,avg_cur,sr,cac,n_episodes\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.6g,%d\n", rep.avg_acc,
                rep.avg_cur, rep.sr, rep.cac, rep.n_episodes);
  csv += buf;
  return csv;
}

}  // namespace skysmooth
