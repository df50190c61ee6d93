#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcllab/diagnostics/diagnostics.hpp"
#include "gcllab/errors.hpp"
#include "gcllab/graphcore/graph.hpp"
#include "gcllab/graphcore/normalize.hpp"

namespace gcl {

struct VerifierInstance {
  Graph graph;
  Matrix h;
};

// Erdős–Rényi graph with n ∈ [2, n_max], edge probability U(0.1, 0.7), and
// H with d ∈ [1, d_max] columns of N(0, h_scale²) entries.
inline VerifierInstance random_verifier_instance(std::mt19937_64& rng, std::size_t n_max, int d_max = 8,
                                                 double h_scale = 0.5) {
  if (n_max < 2) throw ConfigError("verifier: n_max must be >= 2");
  const std::size_t n = std::uniform_int_distribution<std::size_t>(2, n_max)(rng);
  const int d = std::uniform_int_distribution<int>(1, d_max)(rng);
  const double p = std::uniform_real_distribution<double>(0.1, 0.7)(rng);
  std::bernoulli_distribution edge(p);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (edge(rng)) edges.emplace_back(i, j);
  std::normal_distribution<double> g(0.0, h_scale);
  Matrix h(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index k = 0; k < h.size(); ++k) h.data()[k] = g(rng);
  return {Graph::from_edges(n, edges, Matrix::Zero(static_cast<Eigen::Index>(n), 0)), std::move(h)};
}

struct SuiteSection {
  std::string name;
  std::vector<double> values;  // residual, or cosine for directional checks
  std::vector<bool> passed;
  double required_pass_fraction = 1.0;

  std::size_t pass_count() const { return static_cast<std::size_t>(std::count(passed.begin(), passed.end(), true)); }
  bool ok() const {
    return !passed.empty() &&
           static_cast<double>(pass_count()) >= required_pass_fraction * static_cast<double>(passed.size()) - 1e-9;
  }
};

struct SuiteReport {
  std::vector<SuiteSection> sections;
  bool ok() const {
    return std::all_of(sections.begin(), sections.end(), [](const SuiteSection& s) { return s.ok(); });
  }
};

// theorem: "1", "2", "3" or "all". Theorem 2 contributes an exact
// uniform-prior section and a directional section that needs >= 95% of
// trials with cosine > 0.9.
inline SuiteReport run_verifier_suite(const std::string& theorem, int trials, std::size_t n_max, std::uint64_t seed) {
  if (trials < 1) throw UsageError("verify: trials must be >= 1");
  if (theorem != "1" && theorem != "2" && theorem != "3" && theorem != "all")
    throw UsageError("verify: theorem must be 1, 2, 3 or all");
  const bool all = theorem == "all";
  SuiteReport rep;
  if (all || theorem == "1") {
    SuiteSection s{"theorem1", {}, {}, 1.0};
    std::mt19937_64 rng(seed);
    for (int t = 0; t < trials; ++t) {
      auto inst = random_verifier_instance(rng, n_max);
      auto r = verify_theorem1(inst.h, normalize_adjacency(inst.graph));
      s.values.push_back(r.residual);
      s.passed.push_back(r.passed);
    }
    rep.sections.push_back(std::move(s));
  }
  if (all || theorem == "2") {
    SuiteSection exact{"theorem2_uniform_exact", {}, {}, 1.0};
    SuiteSection paper{"theorem2_paper_form_cosine", {}, {}, 0.95};
    std::mt19937_64 rng(seed + 1);
    for (int t = 0; t < trials; ++t) {
      auto inst = random_verifier_instance(rng, n_max);
      auto p = pair_distribution(normalize_adjacency(inst.graph));
      auto u = verify_theorem2(inst.h, p, Theorem2Mode::UniformExact);
      exact.values.push_back(u.residual);
      exact.passed.push_back(u.passed);
      auto f = verify_theorem2(inst.h, p, Theorem2Mode::PaperForm);
      paper.values.push_back(*f.cosine);
      paper.passed.push_back(f.passed);
    }
    rep.sections.push_back(std::move(exact));
    rep.sections.push_back(std::move(paper));
  }
  if (all || theorem == "3") {
    SuiteSection s{"theorem3", {}, {}, 1.0};
    std::mt19937_64 rng(seed + 2);
    for (int t = 0; t < trials; ++t) {
      auto inst = random_verifier_instance(rng, n_max);
      const double alpha = std::uniform_real_distribution<double>(0.0, 2.0 * static_cast<double>(inst.graph.n))(rng);
      auto a = normalize_adjacency(inst.graph);
      auto r = verify_theorem3(inst.h, a, pair_distribution(a), alpha);
      s.values.push_back(r.residual);
      s.passed.push_back(r.passed);
    }
    rep.sections.push_back(std::move(s));
  }
  return rep;
}

inline nlohmann::json suite_to_json(const SuiteReport& rep) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& s : rep.sections) {
    const bool cosine = s.name.find("cosine") != std::string::npos;
    const auto worst = cosine ? std::min_element(s.values.begin(), s.values.end())
                              : std::max_element(s.values.begin(), s.values.end());
    double mean = 0.0;
    for (double v : s.values) mean += v / static_cast<double>(s.values.size());
    std::vector<double> sorted = s.values;
    std::sort(sorted.begin(), sorted.end());
    out[s.name] = {{"trials", s.values.size()},
                   {"passed", s.pass_count()},
                   {"required_pass_fraction", s.required_pass_fraction},
                   {"ok", s.ok()},
                   {cosine ? "min_cosine" : "max_residual", *worst},
                   {"worst_trial", worst - s.values.begin()},
                   {"mean", mean},
                   {"median", sorted[sorted.size() / 2]},
                   {"values", s.values}};
  }
  out["ok"] = rep.ok();
  return out;
}

}  // namespace gcl
