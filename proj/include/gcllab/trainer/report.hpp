#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gcllab/errors.hpp"

namespace gcl {

// Geometry of one model state, measured on the clean (unaugmented) input.
struct RepresentationMetrics {
  double sim_h = 0.0;
  double sim_z = 0.0;
  int rank_h = 0;
  int rank_z = 0;
};

// Trajectories are indexed by logged epoch. The loss at epoch e is the
// pre-update loss of that epoch's views; the other metrics are measured on
// the same pre-update parameters.
struct RunReport {
  std::uint64_t seed = 0;
  int epochs = 0;
  int log_every = 1;
  std::vector<int> logged_epochs;
  std::vector<double> loss;
  std::vector<double> sim_h;
  std::vector<double> sim_z;
  std::vector<int> rank_h;
  std::vector<int> rank_z;
  std::vector<std::pair<std::string, std::vector<double>>> weight_norms;

  bool has_final = false;
  RepresentationMetrics final_metrics;
  std::vector<std::pair<std::string, double>> final_weight_norms;
  std::optional<double> probe_accuracy;
  std::string checkpoint;
  double wall_seconds = 0.0;
};

// Epochs at which a run with these settings records a trajectory point:
// multiples of log_every plus the last epoch.
inline std::vector<int> logged_epoch_schedule(int epochs, int log_every) {
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  std::vector<int> out;
  for (int e = 0; e < epochs; ++e)
    if (e % log_every == 0 || e == epochs - 1) out.push_back(e);
  return out;
}

namespace detail {
// JSON has no NaN; undefined similarities (single-graph sets) travel as null.
inline nlohmann::json nullable(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }
inline nlohmann::json nullable(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(nullable(x));
  return a;
}
inline double nan_or(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
inline std::vector<double> nan_or_vec(const nlohmann::json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(nan_or(x));
  return out;
}
}  // namespace detail

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json wn = nlohmann::json::object();
  for (const auto& [name, traj] : r.weight_norms) wn[name] = traj;
  nlohmann::json fw = nlohmann::json::object();
  for (const auto& [name, v] : r.final_weight_norms) fw[name] = v;
  nlohmann::json j = {
      {"seed", r.seed},
      {"epochs", r.epochs},
      {"log_every", r.log_every},
      {"trajectory",
       {{"epoch", r.logged_epochs},
        {"loss", r.loss},
        {"sim_h", detail::nullable(r.sim_h)},
        {"sim_z", detail::nullable(r.sim_z)},
        {"rank_h", r.rank_h},
        {"rank_z", r.rank_z},
        {"weight_norms", wn}}},
      {"checkpoint", r.checkpoint},
      {"wall_seconds", r.wall_seconds},
  };
  if (r.has_final)
    j["final"] = {{"sim_h", detail::nullable(r.final_metrics.sim_h)},
                  {"sim_z", detail::nullable(r.final_metrics.sim_z)},
                  {"rank_h", r.final_metrics.rank_h},
                  {"rank_z", r.final_metrics.rank_z},
                  {"weight_norms", fw}};
  if (r.probe_accuracy) j["probe_accuracy"] = *r.probe_accuracy;
  return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  try {
    RunReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.epochs = j.at("epochs").get<int>();
    r.log_every = j.at("log_every").get<int>();
    const auto& t = j.at("trajectory");
    r.logged_epochs = t.at("epoch").get<std::vector<int>>();
    r.loss = t.at("loss").get<std::vector<double>>();
    r.sim_h = detail::nan_or_vec(t.at("sim_h"));
    r.sim_z = detail::nan_or_vec(t.at("sim_z"));
    r.rank_h = t.at("rank_h").get<std::vector<int>>();
    r.rank_z = t.at("rank_z").get<std::vector<int>>();
    for (auto it = t.at("weight_norms").begin(); it != t.at("weight_norms").end(); ++it)
      r.weight_norms.emplace_back(it.key(), it.value().get<std::vector<double>>());
    r.checkpoint = j.value("checkpoint", std::string{});
    r.wall_seconds = j.value("wall_seconds", 0.0);
    if (j.contains("final")) {
      const auto& f = j["final"];
      r.has_final = true;
      r.final_metrics = {detail::nan_or(f.at("sim_h")), detail::nan_or(f.at("sim_z")), f.at("rank_h").get<int>(),
                         f.at("rank_z").get<int>()};
      for (auto it = f.at("weight_norms").begin(); it != f.at("weight_norms").end(); ++it)
        r.final_weight_norms.emplace_back(it.key(), it.value().get<double>());
    }
    if (j.contains("probe_accuracy")) r.probe_accuracy = j["probe_accuracy"].get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("run report: ") + e.what());
  }
}

}  // namespace gcl
