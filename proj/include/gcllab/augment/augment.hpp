#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/graphcore/graph.hpp"

namespace gcl {

enum class AugmentKind { Identity, FeatureMask, EdgePerturb, GaussianNoise, SubgraphSample, NodeDrop };

inline const char* to_string(AugmentKind k) {
  switch (k) {
    case AugmentKind::Identity: return "identity";
    case AugmentKind::FeatureMask: return "feature_mask";
    case AugmentKind::EdgePerturb: return "edge_perturb";
    case AugmentKind::GaussianNoise: return "gaussian_noise";
    case AugmentKind::SubgraphSample: return "subgraph_sample";
    case AugmentKind::NodeDrop: return "node_drop";
  }
  return "?";
}

// σ grid for Gaussian-noise views.
inline constexpr double kGaussianSigmaGrid[] = {1e-4, 5e-4, 1e-5};

struct AugmentSpec {
  AugmentKind kind = AugmentKind::Identity;
  double p = 0.0;       // FeatureMask, EdgePerturb, NodeDrop
  double sigma = 0.0;   // GaussianNoise
  double ratio = 1.0;   // SubgraphSample
  bool per_entry = false;  // FeatureMask: mask individual entries instead of columns

  static AugmentSpec identity() { return {}; }
  static AugmentSpec feature_mask(double p, bool per_entry = false) {
    return {AugmentKind::FeatureMask, p, 0.0, 1.0, per_entry};
  }
  static AugmentSpec edge_perturb(double p) { return {AugmentKind::EdgePerturb, p, 0.0, 1.0, false}; }
  static AugmentSpec gaussian_noise(double sigma) { return {AugmentKind::GaussianNoise, 0.0, sigma, 1.0, false}; }
  static AugmentSpec subgraph(double ratio) { return {AugmentKind::SubgraphSample, 0.0, 0.0, ratio, false}; }
  static AugmentSpec node_drop(double p) { return {AugmentKind::NodeDrop, p, 0.0, 1.0, false}; }

  bool preserves_nodes() const noexcept {
    return kind != AugmentKind::SubgraphSample && kind != AugmentKind::NodeDrop;
  }

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    switch (kind) {
      case AugmentKind::Identity: break;
      case AugmentKind::FeatureMask:
      case AugmentKind::EdgePerturb:
        if (!unit(p)) throw ConfigError(std::string(to_string(kind)) + ": p must lie in [0,1]");
        break;
      case AugmentKind::NodeDrop:
        if (!(p >= 0.0 && p < 1.0)) throw ConfigError("node_drop: p must lie in [0,1)");
        break;
      case AugmentKind::GaussianNoise:
        if (!(sigma >= 0.0)) throw ConfigError("gaussian_noise: sigma must be >= 0");
        break;
      case AugmentKind::SubgraphSample:
        if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("subgraph_sample: ratio must lie in (0,1]");
        break;
    }
  }
};

using AugmentPipeline = std::vector<AugmentSpec>;

inline bool preserves_nodes(const AugmentPipeline& pipe) {
  return std::all_of(pipe.begin(), pipe.end(), [](const AugmentSpec& s) { return s.preserves_nodes(); });
}

// An augmented view. `kept[i]` is the original id of view node i.
struct AugmentedGraph {
  Graph graph;
  std::vector<std::size_t> kept;
};

inline Graph feature_mask(const Graph& g, double p, std::mt19937_64& rng, bool per_entry = false) {
  AugmentSpec::feature_mask(p).validate();
  std::bernoulli_distribution drop(p);
  Matrix x = g.features;
  if (per_entry) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (drop(rng)) x.data()[i] = 0.0;
  } else {
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (drop(rng)) x.col(j).setZero();
  }
  return g.with_features(std::move(x));
}

// Deletion only: each undirected edge survives with probability 1 - p.
inline Graph edge_perturb(const Graph& g, double p, std::mt19937_64& rng) {
  AugmentSpec::edge_perturb(p).validate();
  std::bernoulli_distribution drop(p);
  std::vector<Edge> keep;
  for (const Edge& e : g.edge_list())
    if (!drop(rng)) keep.push_back(e);
  Graph out = Graph::from_edges(g.n, keep, g.features, g.labels, g.name);
  out.num_classes = g.num_classes;
  out.graph_label = g.graph_label;
  return out;
}

inline Graph gaussian_noise(const Graph& g, double sigma, std::mt19937_64& rng) {
  AugmentSpec::gaussian_noise(sigma).validate();
  if (sigma == 0.0) return g;
  std::normal_distribution<double> eps(0.0, sigma);
  Matrix x = g.features;
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += eps(rng);
  return g.with_features(std::move(x));
}

// Grows a node set by a random walk from `start` (random if unset) until it
// holds ceil(ratio*n) nodes. When the walk's component is exhausted it jumps
// to a uniformly chosen unvisited node.
inline AugmentedGraph subgraph_sample(const Graph& g, double ratio, std::mt19937_64& rng,
                                      std::optional<std::size_t> start = std::nullopt) {
  AugmentSpec::subgraph(ratio).validate();
  if (g.n == 0) return {g, {}};
  const auto target = std::min<std::size_t>(g.n, static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(g.n) - 1e-9)));
  std::vector<char> in(g.n, 0);
  std::vector<std::size_t> chosen;
  auto pick_unvisited = [&]() {
    std::vector<std::size_t> rest;
    for (std::size_t v = 0; v < g.n; ++v)
      if (!in[v]) rest.push_back(v);
    return rest[std::uniform_int_distribution<std::size_t>(0, rest.size() - 1)(rng)];
  };
  std::size_t cur = start ? *start : std::uniform_int_distribution<std::size_t>(0, g.n - 1)(rng);
  if (cur >= g.n) throw ConfigError("subgraph_sample: start node out of range");
  in[cur] = 1;
  chosen.push_back(cur);
  // Tracks how many nodes are reachable from the current component so the
  // walk can tell when it has nothing new left to find.
  std::vector<char> reach(g.n, 0);
  std::size_t reach_count = 0;
  auto flood = [&](std::size_t s) {
    std::vector<std::size_t> stack{s};
    if (reach[s]) return;
    reach[s] = 1;
    ++reach_count;
    while (!stack.empty()) {
      std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t k = g.adjacency.row_offsets[u]; k < g.adjacency.row_offsets[u + 1]; ++k) {
        std::size_t w = g.adjacency.col_indices[k];
        if (!reach[w]) {
          reach[w] = 1;
          ++reach_count;
          stack.push_back(w);
        }
      }
    }
  };
  flood(cur);
  while (chosen.size() < target) {
    if (chosen.size() == reach_count) {
      cur = pick_unvisited();
      in[cur] = 1;
      chosen.push_back(cur);
      flood(cur);
      continue;
    }
    std::size_t deg = g.degree(cur);
    std::size_t k = std::uniform_int_distribution<std::size_t>(0, deg - 1)(rng);
    cur = g.adjacency.col_indices[g.adjacency.row_offsets[cur] + k];
    if (!in[cur]) {
      in[cur] = 1;
      chosen.push_back(cur);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  Graph sub = induced_subgraph(g, chosen);
  return {std::move(sub), std::move(chosen)};
}

// Each node dropped independently with probability p; redrawn if nothing
// survives.
inline AugmentedGraph node_drop(const Graph& g, double p, std::mt19937_64& rng) {
  AugmentSpec::node_drop(p).validate();
  if (g.n == 0) return {g, {}};
  std::bernoulli_distribution drop(p);
  std::vector<std::size_t> kept;
  do {
    kept.clear();
    for (std::size_t v = 0; v < g.n; ++v)
      if (!drop(rng)) kept.push_back(v);
  } while (kept.empty());
  Graph sub = induced_subgraph(g, kept);
  return {std::move(sub), std::move(kept)};
}

inline AugmentedGraph apply_augment(const AugmentSpec& spec, const Graph& g, std::mt19937_64& rng) {
  spec.validate();
  auto all = [&] {
    std::vector<std::size_t> k(g.n);
    std::iota(k.begin(), k.end(), std::size_t{0});
    return k;
  };
  switch (spec.kind) {
    case AugmentKind::Identity: return {g, all()};
    case AugmentKind::FeatureMask: return {feature_mask(g, spec.p, rng, spec.per_entry), all()};
    case AugmentKind::EdgePerturb: return {edge_perturb(g, spec.p, rng), all()};
    case AugmentKind::GaussianNoise: return {gaussian_noise(g, spec.sigma, rng), all()};
    case AugmentKind::SubgraphSample: return subgraph_sample(g, spec.ratio, rng);
    case AugmentKind::NodeDrop: return node_drop(g, spec.p, rng);
  }
  throw ConfigError("unknown augmentation");
}

// Stages run in order; each stage draws from its own generator seeded by one
// draw of `rng`, so inserting a stage never perturbs the streams of the
// stages before it.
inline AugmentedGraph apply_pipeline(const AugmentPipeline& pipe, const Graph& g, std::mt19937_64& rng) {
  std::vector<std::uint64_t> stage_seeds(pipe.size());
  for (auto& s : stage_seeds) s = rng();
  AugmentedGraph cur;
  cur.graph = g;
  cur.kept.resize(g.n);
  std::iota(cur.kept.begin(), cur.kept.end(), std::size_t{0});
  for (std::size_t k = 0; k < pipe.size(); ++k) {
    std::mt19937_64 stage_rng(stage_seeds[k]);
    AugmentedGraph next = apply_augment(pipe[k], cur.graph, stage_rng);
    for (std::size_t& id : next.kept) id = cur.kept[id];
    cur = std::move(next);
  }
  return cur;
}

}  // namespace gcl
