#pragma once

#include <glob.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "gcllab/cli/config.hpp"
#include "gcllab/diagnostics/diagnostics.hpp"
#include "gcllab/diagnostics/suite.hpp"
#include "gcllab/evalkit/ablation.hpp"
#include "gcllab/graphcore/io.hpp"
#include "gcllab/graphcore/synthetic.hpp"
#include "gcllab/trainer/trainer.hpp"

namespace gcl::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs a command body, mapping exceptions onto the exit-code contract.
template <class Fn>
int guarded(std::ostream& err, Fn&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// `base` if it does not exist yet, otherwise the first free base-1, base-2, ...
inline fs::path fresh_run_dir(const fs::path& base) {
  fs::path candidate = base;
  for (int k = 1; fs::exists(candidate); ++k) candidate = base.string() + "-" + std::to_string(k);
  fs::create_directories(candidate);
  return candidate;
}

struct GenDataOptions {
  std::string kind = "sbm";  // sbm | graph_set
  std::size_t n = 400;
  int classes = 4;
  double p_in = 0.1;
  double p_out = 0.01;
  double noise = 1.0;
  std::size_t feature_dim = 100;
  std::size_t num_graphs = 200;
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_gen_data(const GenDataOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.out.empty()) throw UsageError("gen-data: --out is required");
    char buf[160];
    if (o.kind == "sbm") {
      SbmParams p{o.n, o.classes, o.p_in, o.p_out, o.feature_dim, o.noise, o.seed};
      Graph g = generate_sbm(p);
      g.name = "sbm";
      save_dataset(o.out, {g});
      std::snprintf(buf, sizeof buf, "n=%zu edges=%zu classes=%d homophily=%.4f\n", g.n, g.num_edges(), g.num_classes,
                    edge_homophily(g));
    } else if (o.kind == "graph_set") {
      GraphSetParams p;
      p.num_graphs = o.num_graphs;
      p.seed = o.seed;
      auto graphs = generate_graph_dataset(p);
      save_dataset(o.out, graphs);
      double nodes = 0, edges = 0;
      for (const auto& g : graphs) {
        nodes += static_cast<double>(g.n);
        edges += static_cast<double>(g.num_edges());
      }
      std::snprintf(buf, sizeof buf, "graphs=%zu mean_nodes=%.2f mean_edges=%.2f\n", graphs.size(),
                    nodes / static_cast<double>(graphs.size()), edges / static_cast<double>(graphs.size()));
    } else {
      throw UsageError("gen-data: --kind must be sbm or graph_set");
    }
    out << buf;
    return kExitOk;
  });
}

struct TrainOutcome {
  fs::path run_dir;
};

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Writes one directory per (loss label, seed) plus runs.csv (one line per
// seed) and summary.csv (one line per loss label). On a runtime failure the
// artifacts already written stay in place next to error.txt.
inline int cmd_train(const std::string& config_path, unsigned workers, std::ostream& out, std::ostream& err,
                     TrainOutcome* outcome = nullptr) {
  ExperimentConfig cfg;
  Dataset data;
  if (int rc = guarded(err, [&] {
        if (!fs::exists(config_path)) throw UsageError("train: config not found: " + config_path);
        cfg = load_experiment_config(config_path);
        try {
          data = load_experiment_dataset(cfg.dataset);
        } catch (const DataError& e) {
          throw ConfigError(std::string("dataset: ") + e.what());
        }
        for (const auto& v : cfg.losses) {
          TrainConfig tc = cfg.train;
          tc.loss = v.spec;
          tc.validate();
          if (is_node_task(tc)) {
            if (data.graphs.size() != 1) throw ConfigError("node-level loss '" + v.label + "' needs a single-graph dataset");
            validate_node_config(tc, data.graphs.front());
          } else {
            validate_graph_config(tc, data.graphs);
          }
        }
        return kExitOk;
      });
      rc != kExitOk)
    return rc;

  fs::path run_dir;
  if (int rc = guarded(err, [&] {
        run_dir = fresh_run_dir(cfg.output_dir);
        write_text(run_dir / "config.json", read_text(config_path));
        return kExitOk;
      });
      rc != kExitOk)
    return rc;
  if (outcome) outcome->run_dir = run_dir;

  std::string runs_csv = "row,dataset,seed,accuracy,final_sim_h,final_sim_z,final_rank_h,final_rank_z\n";
  std::string summary_csv =
      "row,dataset,encoder,level,seeds,mean_accuracy,std_accuracy,mean_sim_h,mean_sim_z,mean_rank_h,mean_rank_z\n";
  int rc = guarded(err, [&] {
    for (const auto& variant : cfg.losses) {
      TrainConfig tc = cfg.train;
      tc.loss = variant.spec;
      MultiSeedResult res = multi_seed(tc, data, cfg.seeds, workers);
      std::vector<double> sim_h, sim_z, rank_h, rank_z;
      for (const auto& r : res.runs) {
        fs::path dir = run_dir / variant.label / ("seed_" + std::to_string(r.seed));
        fs::create_directories(dir);
        json meta = {{"encoder", encoder_to_json(tc.encoder)},
                     {"projection", projection_to_json(tc.projection)},
                     {"level", to_string(tc.loss.level)},
                     {"dataset", cfg.dataset.name},
                     {"seed", r.seed},
                     {"epochs", tc.epochs}};
        save_checkpoint((dir / "checkpoint.json").string(), r.params, meta);
        RunReport rep = r.report;
        rep.checkpoint = (fs::path(variant.label) / ("seed_" + std::to_string(r.seed)) / "checkpoint.json").string();
        write_text(dir / "report.json", report_to_json(rep).dump(2) + "\n");
        if (r.accuracy) write_text(dir / "probe.json", json{{"accuracy", *r.accuracy}}.dump() + "\n");
        const auto& m = r.report.final_metrics;
        runs_csv += variant.label + "," + cfg.dataset.name + "," + std::to_string(r.seed) + "," +
                    (r.accuracy ? fmt(*r.accuracy) : "") + "," + fmt(m.sim_h) + "," + fmt(m.sim_z) + "," +
                    std::to_string(m.rank_h) + "," + std::to_string(m.rank_z) + "\n";
        sim_h.push_back(m.sim_h);
        sim_z.push_back(m.sim_z);
        rank_h.push_back(m.rank_h);
        rank_z.push_back(m.rank_z);
      }
      summary_csv += variant.label + "," + cfg.dataset.name + "," + to_string(tc.encoder.kind) + "," +
                     to_string(tc.loss.level) + "," + std::to_string(cfg.seeds.size()) + "," +
                     (tc.eval.enabled ? fmt(res.mean_accuracy) + "," + fmt(res.std_accuracy) : ",") + "," +
                     fmt(mean_std(sim_h).first) + "," + fmt(mean_std(sim_z).first) + "," + fmt(mean_std(rank_h).first) +
                     "," + fmt(mean_std(rank_z).first) + "\n";
      write_text(run_dir / "runs.csv", runs_csv);
      write_text(run_dir / "summary.csv", summary_csv);
      out << variant.label << ": mean accuracy " << fmt(res.mean_accuracy) << " (std " << fmt(res.std_accuracy)
          << ") over " << cfg.seeds.size() << " seed(s)\n";
    }
    return kExitOk;
  });
  if (rc != kExitOk) {
    try {
      write_text(run_dir / "error.txt", "training failed; see stderr of the run\n");
    } catch (...) {
    }
    if (rc == kExitUsage) rc = kExitFailure;  // config was already accepted; this is a runtime failure
  }
  out << "run directory: " << run_dir.string() << '\n';
  return rc;
}

struct VerifyOptions {
  std::string theorem = "all";
  int trials = 100;
  std::size_t n_max = 30;
  std::uint64_t seed = 0;
  std::string out;  // JSON report path; stdout when empty
};

inline int cmd_verify(const VerifyOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.n_max < 2) throw UsageError("verify: --n-max must be >= 2");
    SuiteReport rep = run_verifier_suite(o.theorem, o.trials, o.n_max, o.seed);
    json j = suite_to_json(rep);
    if (o.out.empty())
      out << j.dump(2) << '\n';
    else
      write_text(o.out, j.dump(2) + "\n");
    for (const auto& s : rep.sections) {
      const bool cosine = s.name.find("cosine") != std::string::npos;
      const auto& sec = j[s.name];
      err << s.name << ": " << s.pass_count() << "/" << s.values.size() << " passed, "
          << (cosine ? "min cosine " : "max residual ") << (cosine ? sec["min_cosine"] : sec["max_residual"]).get<double>()
          << (s.ok() ? "" : "  FAILED") << '\n';
    }
    return rep.ok() ? kExitOk : kExitFailure;
  });
}

struct DiagnoseOptions {
  std::string checkpoint;
  std::string dataset;
  std::string out;
};

inline int cmd_diagnose(const DiagnoseOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.out.empty()) throw UsageError("diagnose: --out is required");
    for (const auto& p : {o.checkpoint, o.dataset})
      if (!fs::exists(p)) throw UsageError("diagnose: file not found: " + p);
    json cj = read_json_file(o.checkpoint);
    ModelParams params = params_from_json(cj);
    if (!cj.contains("meta")) throw ConfigError("diagnose: checkpoint carries no model description");
    const json& meta = cj["meta"];
    TrainConfig tc;
    tc.encoder = parse_encoder(meta.at("encoder"));
    tc.projection = parse_projection(meta.at("projection"));
    LossVariant lv = parse_loss(json{{"level", meta.at("level")}}, "meta");
    tc.loss.level = lv.spec.level;
    std::vector<Graph> graphs = load_dataset(o.dataset);
    Matrix h, z;
    if (tc.loss.level == ContrastLevel::NodeLL) {
      if (graphs.size() != 1) throw DataError("diagnose: node-level checkpoint needs a single-graph dataset");
      std::tie(h, z) = embed(tc.encoder, tc.projection, params, graphs.front());
    } else {
      auto e = embed_graphs(tc, params, batch_graphs(graphs));
      h = std::move(e.h);
      z = std::move(e.z);
    }
    SpectrumReport sh = singular_spectrum(h), sz = singular_spectrum(z);
    json norms = json::object();
    for (const auto& [name, v] : weight_norms(params)) norms[name] = v;
    json metrics = {{"rows", h.rows()},
                    {"sim_h", avg_pairwise_cosine(h)},
                    {"sim_z", avg_pairwise_cosine(z)},
                    {"rank_h", sh.effective_rank},
                    {"rank_z", sz.effective_rank},
                    {"rel_threshold", sh.rel_threshold},
                    {"weight_norms", norms}};
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "metrics.json", metrics.dump(2) + "\n");
    write_text(fs::path(o.out) / "spectrum_h.csv", spectrum_to_csv(sh));
    write_text(fs::path(o.out) / "spectrum_z.csv", spectrum_to_csv(sz));
    out << "sim_h=" << metrics["sim_h"].get<double>() << " sim_z=" << metrics["sim_z"].get<double>()
        << " rank_h=" << sh.effective_rank << " rank_z=" << sz.effective_rank << '\n';
    return kExitOk;
  });
}

// Paths containing glob metacharacters are expanded; plain paths pass through.
inline std::vector<std::string> expand_paths(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& p : patterns) {
    if (p.find_first_of("*?[") == std::string::npos) {
      out.push_back(p);
      continue;
    }
    glob_t g{};
    if (glob(p.c_str(), 0, nullptr, &g) == 0)
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    globfree(&g);
  }
  return out;
}

inline std::vector<RunRecord> read_runs_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("row,dataset,seed,accuracy", 0) != 0) throw DataError(path.string() + ": unexpected header");
  std::vector<RunRecord> out;
  for (std::size_t ln = 2; std::getline(in, line); ++ln) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() < 4) throw ParseError(path.string() + ": too few fields", ln);
    if (f[3].empty()) throw DataError(path.string() + ": run without probe accuracy (eval disabled?)");
    try {
      out.push_back({f[0], f[1], std::stoull(f[2]), std::stod(f[3])});
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad number", ln);
    }
  }
  return out;
}

struct TableOptions {
  std::vector<std::string> run_dirs;
  std::string reference = "Contrast";
  std::string out;  // output directory for table.csv / table.md
};

inline int cmd_table(const TableOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto dirs = expand_paths(o.run_dirs);
    if (dirs.empty()) throw UsageError("table: no run directories matched");
    std::vector<RunRecord> runs;
    // The same (row, dataset, seed) may come from a rerun, but only with the same accuracy.
    std::map<std::tuple<std::string, std::string, std::uint64_t>, std::pair<double, std::string>> seen;
    for (const auto& d : dirs) {
      if (!fs::exists(fs::path(d) / "runs.csv")) throw UsageError("table: " + d + " has no runs.csv");
      for (const auto& r : read_runs_csv(fs::path(d) / "runs.csv")) {
        auto [it, fresh] = seen.try_emplace({r.row, r.dataset, r.seed}, r.accuracy, d);
        if (fresh)
          runs.push_back(r);
        else if (it->second.first != r.accuracy)
          throw DataError("table: " + r.row + "/" + r.dataset + " seed " + std::to_string(r.seed) +
                          " has different accuracies in " + it->second.second + " and " + d);
      }
    }
    TableSpec spec;
    spec.reference = o.reference;
    std::map<std::string, std::set<std::string>> datasets_of;
    for (const auto& r : runs) {
      if (std::find(spec.rows.begin(), spec.rows.end(), r.row) == spec.rows.end()) spec.rows.push_back(r.row);
      if (std::find(spec.datasets.begin(), spec.datasets.end(), r.dataset) == spec.datasets.end())
        spec.datasets.push_back(r.dataset);
      datasets_of[r.row].insert(r.dataset);
    }
    if (std::find(spec.rows.begin(), spec.rows.end(), o.reference) == spec.rows.end())
      throw UsageError("table: reference row '" + o.reference + "' not found in the runs");
    const std::set<std::string> all(spec.datasets.begin(), spec.datasets.end());
    std::string mismatch;
    for (const auto& row : spec.rows)
      if (datasets_of[row] != all) {
        mismatch += "  " + row + " has {";
        for (const auto& d : datasets_of[row]) mismatch += " " + d;
        mismatch += " }\n";
      }
    if (!mismatch.empty()) {
      err << "table: rows cover different dataset sets:\n" << mismatch;
      return kExitFailure;
    }
    AblationTable t = build_ablation(spec, runs);
    std::string md = ablation_to_markdown(t);
    if (!o.out.empty()) {
      fs::create_directories(o.out);
      write_text(fs::path(o.out) / "table.csv", ablation_to_csv(t));
      write_text(fs::path(o.out) / "table.md", md);
    }
    out << md;
    return kExitOk;
  });
}

}  // namespace gcl::cli
