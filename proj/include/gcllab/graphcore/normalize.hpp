#pragma once

#include <cmath>
#include <memory>
#include <tuple>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/graphcore/graph.hpp"
#include "gcllab/numkit/sparse.hpp"

namespace gcl {

// Â = D̄^{-1/2}(A+I)D̄^{-1/2} together with its total mass c = Σ Â.
struct NormalizedAdjacency {
  std::shared_ptr<const SparseMatrix> matrix;
  double mass = 0.0;

  const SparseMatrix& sparse() const { return *matrix; }
  std::size_t size() const { return matrix ? matrix->rows : 0; }
};

inline NormalizedAdjacency normalize_adjacency(const Graph& g) {
  if (!g.adjacency.is_symmetric()) throw PreconditionError("normalize_adjacency: adjacency not symmetric");
  const std::size_t n = g.n;
  std::vector<double> dbar = g.adjacency.row_sums();
  for (double& d : dbar) d += 1.0;
  std::vector<std::tuple<std::size_t, std::size_t, double>> trip;
  trip.reserve(g.adjacency.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    trip.emplace_back(i, i, 1.0 / dbar[i]);
    for (std::size_t k = g.adjacency.row_offsets[i]; k < g.adjacency.row_offsets[i + 1]; ++k) {
      std::size_t j = g.adjacency.col_indices[k];
      trip.emplace_back(i, j, g.adjacency.values[k] / std::sqrt(dbar[i] * dbar[j]));
    }
  }
  auto m = std::make_shared<SparseMatrix>(SparseMatrix::from_triplets(n, n, std::move(trip)));
  NormalizedAdjacency out;
  out.mass = m->sum();
  out.matrix = std::move(m);
  return out;
}

// P(x, x⁺) = Â/c and its marginal P(x).
struct PairDistribution {
  SparseMatrix joint;
  Vector marginal;
  double mass = 0.0;
};

inline PairDistribution pair_distribution(const NormalizedAdjacency& a) {
  if (!(a.mass > 0.0)) throw PreconditionError("pair_distribution: zero mass");
  PairDistribution p;
  p.mass = a.mass;
  p.joint = a.sparse();
  for (double& v : p.joint.values) v /= a.mass;
  auto rs = p.joint.row_sums();
  p.marginal = Eigen::Map<const Vector>(rs.data(), static_cast<Eigen::Index>(rs.size()));
  return p;
}

// Everything an encoder needs from a graph: Â for GCN, raw A for GIN, and the
// pair marginal for ContraNorm.
struct GraphContext {
  NormalizedAdjacency norm_adj;
  std::shared_ptr<const SparseMatrix> adjacency;
  Vector marginal;
  std::size_t n = 0;
};

inline GraphContext make_context(const Graph& g) {
  GraphContext ctx;
  ctx.n = g.n;
  ctx.norm_adj = normalize_adjacency(g);
  ctx.adjacency = std::make_shared<const SparseMatrix>(g.adjacency);
  ctx.marginal = pair_distribution(ctx.norm_adj).marginal;
  return ctx;
}

}  // namespace gcl
