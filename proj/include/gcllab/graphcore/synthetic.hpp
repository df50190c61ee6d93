#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/graphcore/graph.hpp"

namespace gcl {

struct SbmParams {
  std::size_t n = 400;
  int num_classes = 4;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t feature_dim = 100;
  double feature_noise = 1.0;
  std::uint64_t seed = 0;
};

// Random orthonormal directions in R^dim (rows), by Gram-Schmidt on Gaussian draws.
inline Matrix random_orthonormal_rows(std::size_t k, std::size_t dim, std::mt19937_64& rng) {
  if (k > dim) throw ConfigError("orthonormal rows: need k <= dim");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < k; ++r) {
    for (;;) {
      Eigen::RowVectorXd v(static_cast<Eigen::Index>(dim));
      for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = gauss(rng);
      for (std::size_t p = 0; p < r; ++p) v -= v.dot(q.row(static_cast<Eigen::Index>(p))) * q.row(static_cast<Eigen::Index>(p));
      double nrm = v.norm();
      if (nrm < 1e-8) continue;
      q.row(static_cast<Eigen::Index>(r)) = v / nrm;
      break;
    }
  }
  return q;
}

// Planted-partition graph. Node i belongs to class floor(i*k/n), so classes
// are contiguous and balanced to within one node.
inline Graph generate_sbm(const SbmParams& prm) {
  if (prm.num_classes < 1) throw ConfigError("sbm: num_classes must be >= 1");
  const auto k = static_cast<std::size_t>(prm.num_classes);
  if (prm.n < k) throw ConfigError("sbm: n < num_classes");
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(prm.p_in) || !prob_ok(prm.p_out)) throw ConfigError("sbm: probabilities must lie in [0,1]");
  if (!(prm.feature_noise >= 0.0)) throw ConfigError("sbm: feature_noise must be >= 0");
  if (prm.feature_dim < k) throw ConfigError("sbm: feature_dim must be >= num_classes for orthogonal means");

  std::mt19937_64 rng(prm.seed);
  std::vector<int> labels(prm.n);
  for (std::size_t i = 0; i < prm.n; ++i) labels[i] = static_cast<int>(i * k / prm.n);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < prm.n; ++i)
    for (std::size_t j = i + 1; j < prm.n; ++j)
      if (unif(rng) < (labels[i] == labels[j] ? prm.p_in : prm.p_out)) edges.emplace_back(i, j);

  Matrix means = random_orthonormal_rows(k, prm.feature_dim, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(prm.n), static_cast<Eigen::Index>(prm.feature_dim));
  for (std::size_t i = 0; i < prm.n; ++i) {
    auto row = x.row(static_cast<Eigen::Index>(i));
    row = means.row(labels[i]);
    if (prm.feature_noise > 0.0)
      for (Eigen::Index j = 0; j < row.size(); ++j) row(j) += prm.feature_noise * gauss(rng);
  }
  Graph g = Graph::from_edges(prm.n, edges, std::move(x), std::move(labels), "sbm");
  g.num_classes = prm.num_classes;
  return g;
}

struct GraphSetParams {
  std::size_t num_graphs = 200;
  std::size_t min_nodes = 12;
  std::size_t max_nodes = 24;
  int num_node_types = 7;
  // Probability that a node's type is drawn from its class's preferred half
  // of the type range; 0.5 makes types uninformative.
  double type_bias = 0.75;
  std::uint64_t seed = 0;
};

// Binary graph-classification set. Class 0 graphs are two dense communities
// joined by a few bridges; class 1 graphs are sparser Erdős–Rényi-like with a
// ring backbone. Node features are one-hot types whose distribution leans
// towards a class-specific half of the type range.
inline std::vector<Graph> generate_graph_dataset(const GraphSetParams& prm) {
  if (prm.num_graphs < 2) throw ConfigError("graph dataset: need at least 2 graphs");
  if (prm.min_nodes < 2 || prm.max_nodes < prm.min_nodes) throw ConfigError("graph dataset: bad node range");
  if (prm.num_node_types < 2) throw ConfigError("graph dataset: need at least 2 node types");
  if (!(prm.type_bias >= 0.0 && prm.type_bias <= 1.0)) throw ConfigError("graph dataset: type_bias in [0,1]");

  std::mt19937_64 rng(prm.seed);
  std::uniform_int_distribution<std::size_t> size_dist(prm.min_nodes, prm.max_nodes);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int t = prm.num_node_types;
  const int half = t / 2;
  std::vector<Graph> out;
  out.reserve(prm.num_graphs);
  for (std::size_t gi = 0; gi < prm.num_graphs; ++gi) {
    const int cls = static_cast<int>(gi % 2);
    const std::size_t n = size_dist(rng);
    std::vector<Edge> edges;
    if (cls == 0) {
      const std::size_t cut = n / 2;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          bool same = (i < cut) == (j < cut);
          if (unif(rng) < (same ? 0.5 : 0.03)) edges.emplace_back(i, j);
        }
      edges.emplace_back(cut - 1, cut);
    } else {
      for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 2; j < n; ++j)
          if (unif(rng) < 0.08) edges.emplace_back(i, j);
    }
    Matrix x = Matrix::Zero(static_cast<Eigen::Index>(n), t);
    for (std::size_t i = 0; i < n; ++i) {
      bool preferred = unif(rng) < prm.type_bias;
      int lo = 0, hi = t;  // class 0 prefers [0, half), class 1 prefers [half, t)
      if ((cls == 0) == preferred) hi = half;
      else lo = half;
      std::uniform_int_distribution<int> pick(lo, hi - 1);
      x(static_cast<Eigen::Index>(i), pick(rng)) = 1.0;
    }
    Graph g = Graph::from_edges(n, edges, std::move(x), std::nullopt, "graphset");
    g.graph_label = cls;
    g.num_classes = 2;
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace gcl
