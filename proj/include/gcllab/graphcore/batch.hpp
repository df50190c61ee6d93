#pragma once

#include <tuple>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/graphcore/graph.hpp"

namespace gcl {

// Disjoint union of graphs. Node rows of graph i occupy
// [node_offsets[i], node_offsets[i+1]).
struct GraphBatch {
  std::vector<Graph> graphs;
  std::vector<std::size_t> node_offsets;
  std::vector<std::size_t> graph_assignment;
  Graph merged;  // block-diagonal adjacency, stacked features

  std::size_t num_graphs() const noexcept { return graphs.size(); }
  std::size_t num_nodes() const noexcept { return merged.n; }
  std::size_t graph_size(std::size_t i) const { return node_offsets[i + 1] - node_offsets[i]; }

  std::vector<int> graph_labels() const {
    std::vector<int> y;
    y.reserve(graphs.size());
    for (const Graph& g : graphs) {
      if (!g.graph_label) throw DataError("batch: graph without label");
      y.push_back(*g.graph_label);
    }
    return y;
  }
};

// Graphs with zero feature columns get all-one pseudo features of the common
// dimension (1 if no graph carries features).
inline GraphBatch batch_graphs(std::vector<Graph> graphs) {
  if (graphs.empty()) throw DataError("batch_graphs: empty graph list");
  std::size_t dim = 0;
  for (const Graph& g : graphs) {
    if (g.feature_dim() == 0) continue;
    if (dim == 0) dim = g.feature_dim();
    else if (g.feature_dim() != dim)
      throw DataError("batch_graphs: mixed feature dims " + std::to_string(dim) + " and " +
                      std::to_string(g.feature_dim()));
  }
  if (dim == 0) dim = 1;
  for (Graph& g : graphs)
    if (g.feature_dim() == 0) g.features = Matrix::Ones(static_cast<Eigen::Index>(g.n), static_cast<Eigen::Index>(dim));

  GraphBatch b;
  b.node_offsets.push_back(0);
  std::size_t total = 0, total_nnz = 0;
  for (const Graph& g : graphs) {
    total += g.n;
    total_nnz += g.adjacency.nnz();
    b.node_offsets.push_back(total);
  }
  SparseMatrix adj;
  adj.rows = adj.cols = total;
  adj.row_offsets.assign(total + 1, 0);
  adj.col_indices.reserve(total_nnz);
  adj.values.reserve(total_nnz);
  Matrix x(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(dim));
  b.graph_assignment.resize(total);
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = graphs[gi];
    const std::size_t off = b.node_offsets[gi];
    if (g.n > 0) x.middleRows(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(g.n)) = g.features;
    for (std::size_t i = 0; i < g.n; ++i) {
      b.graph_assignment[off + i] = gi;
      for (std::size_t k = g.adjacency.row_offsets[i]; k < g.adjacency.row_offsets[i + 1]; ++k) {
        adj.col_indices.push_back(off + g.adjacency.col_indices[k]);
        adj.values.push_back(g.adjacency.values[k]);
      }
      adj.row_offsets[off + i + 1] = adj.col_indices.size();
    }
  }
  b.merged.n = total;
  b.merged.adjacency = std::move(adj);
  b.merged.features = std::move(x);
  b.merged.name = "batch";
  b.graphs = std::move(graphs);
  return b;
}

}  // namespace gcl
