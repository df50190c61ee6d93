#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/numkit/matrix.hpp"
#include "gcllab/numkit/sparse.hpp"

namespace gcl {

using Edge = std::pair<std::size_t, std::size_t>;

// Immutable attributed graph. The adjacency is binary and symmetric with both
// directions of every undirected edge stored, and never holds self-loops.
struct Graph {
  std::size_t n = 0;
  SparseMatrix adjacency;
  Matrix features;
  std::optional<std::vector<int>> labels;
  std::optional<int> graph_label;
  int num_classes = 0;
  std::string name;

  // Builds from an undirected edge list. Self-loops and duplicates (in either
  // orientation) are dropped.
  static Graph from_edges(std::size_t n, const std::vector<Edge>& edges, Matrix features,
                          std::optional<std::vector<int>> labels = std::nullopt, std::string name = {}) {
    if (features.rows() != static_cast<Eigen::Index>(n))
      throw DataError("graph: feature rows " + std::to_string(features.rows()) + " != node count " +
                      std::to_string(n));
    std::vector<std::tuple<std::size_t, std::size_t, double>> trip;
    std::vector<Edge> canon;
    canon.reserve(edges.size());
    for (auto [a, b] : edges) {
      if (a >= n || b >= n) throw DataError("graph: edge endpoint out of range");
      if (a == b) continue;
      canon.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(canon.begin(), canon.end());
    canon.erase(std::unique(canon.begin(), canon.end()), canon.end());
    trip.reserve(canon.size() * 2);
    for (auto [a, b] : canon) {
      trip.emplace_back(a, b, 1.0);
      trip.emplace_back(b, a, 1.0);
    }
    Graph g;
    g.n = n;
    g.adjacency = SparseMatrix::from_triplets(n, n, std::move(trip));
    g.features = std::move(features);
    if (labels) {
      if (labels->size() != n) throw DataError("graph: label count != node count");
      int k = 0;
      for (int y : *labels) {
        if (y < 0) throw DataError("graph: negative label");
        k = std::max(k, y + 1);
      }
      g.num_classes = k;
    }
    g.labels = std::move(labels);
    g.name = std::move(name);
    return g;
  }

  std::size_t num_edges() const noexcept { return adjacency.nnz() / 2; }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features.cols()); }

  std::size_t degree(std::size_t i) const { return adjacency.row_offsets[i + 1] - adjacency.row_offsets[i]; }

  // Undirected edges with i < j, in row-major order.
  std::vector<Edge> edge_list() const {
    std::vector<Edge> out;
    out.reserve(num_edges());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = adjacency.row_offsets[i]; k < adjacency.row_offsets[i + 1]; ++k)
        if (adjacency.col_indices[k] > i) out.emplace_back(i, adjacency.col_indices[k]);
    return out;
  }

  bool has_edge(std::size_t i, std::size_t j) const { return adjacency.at(i, j) != 0.0; }

  // Same topology and labels, new features.
  Graph with_features(Matrix x) const {
    if (x.rows() != static_cast<Eigen::Index>(n)) throw ShapeError("with_features: row count mismatch");
    Graph g = *this;
    g.features = std::move(x);
    return g;
  }

  // Throws DataError on any violated structural invariant.
  void validate() const {
    if (adjacency.rows != n || adjacency.cols != n) throw DataError("graph: adjacency shape");
    if (!adjacency.well_formed()) throw DataError("graph: malformed CSR");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = adjacency.row_offsets[i]; k < adjacency.row_offsets[i + 1]; ++k) {
        std::size_t j = adjacency.col_indices[k];
        if (j == i) throw DataError("graph: stored self-loop at " + std::to_string(i));
        if (adjacency.values[k] != 1.0) throw DataError("graph: non-binary adjacency");
        if (!has_edge(j, i)) throw DataError("graph: asymmetric edge");
      }
    }
    if (features.rows() != static_cast<Eigen::Index>(n)) throw DataError("graph: feature rows");
    if (labels) {
      if (labels->size() != n) throw DataError("graph: label count");
      for (int y : *labels)
        if (y < 0 || y >= num_classes) throw DataError("graph: label out of range");
    }
  }
};

inline bool structurally_equal(const Graph& a, const Graph& b) {
  return a.n == b.n && a.adjacency.row_offsets == b.adjacency.row_offsets &&
         a.adjacency.col_indices == b.adjacency.col_indices && a.adjacency.values == b.adjacency.values &&
         a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
         a.features == b.features && a.labels == b.labels && a.graph_label == b.graph_label &&
         a.num_classes == b.num_classes;
}

// Induced subgraph on `kept` (ascending node ids), reindexed 0..k-1.
inline Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& kept) {
  std::vector<std::ptrdiff_t> remap(g.n, -1);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    if (kept[k] >= g.n) throw DataError("induced_subgraph: node out of range");
    remap[kept[k]] = static_cast<std::ptrdiff_t>(k);
  }
  std::vector<Edge> edges;
  for (auto [i, j] : g.edge_list())
    if (remap[i] >= 0 && remap[j] >= 0)
      edges.emplace_back(static_cast<std::size_t>(remap[i]), static_cast<std::size_t>(remap[j]));
  Matrix x(static_cast<Eigen::Index>(kept.size()), g.features.cols());
  for (std::size_t k = 0; k < kept.size(); ++k)
    x.row(static_cast<Eigen::Index>(k)) = g.features.row(static_cast<Eigen::Index>(kept[k]));
  std::optional<std::vector<int>> labels;
  if (g.labels) {
    labels.emplace();
    for (std::size_t v : kept) labels->push_back((*g.labels)[v]);
  }
  Graph out = Graph::from_edges(kept.size(), edges, std::move(x), std::move(labels), g.name);
  out.num_classes = g.num_classes;
  out.graph_label = g.graph_label;
  return out;
}

// Fraction of undirected edges whose endpoints share a label.
inline double edge_homophily(const Graph& g) {
  if (!g.labels) throw DataError("edge_homophily: graph has no node labels");
  auto edges = g.edge_list();
  if (edges.empty()) return 0.0;
  std::size_t same = 0;
  for (auto [i, j] : edges)
    if ((*g.labels)[i] == (*g.labels)[j]) ++same;
  return static_cast<double>(same) / static_cast<double>(edges.size());
}

}  // namespace gcl
