#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/graphcore/batch.hpp"
#include "gcllab/graphcore/normalize.hpp"
#include "gcllab/numkit/ops.hpp"

namespace gcl {

enum class LossFamily { Contrast, NoPos, NoNeg };
enum class ContrastLevel { NodeLL, GraphGG, GraphNodeLL };
enum class NegativeScope { InterView, BothViews };

inline const char* to_string(LossFamily f) {
  switch (f) {
    case LossFamily::Contrast: return "contrast";
    case LossFamily::NoPos: return "no_pos";
    case LossFamily::NoNeg: return "no_neg";
  }
  return "?";
}
inline const char* to_string(ContrastLevel l) {
  switch (l) {
    case ContrastLevel::NodeLL: return "node_ll";
    case ContrastLevel::GraphGG: return "graph_gg";
    case ContrastLevel::GraphNodeLL: return "graph_node_ll";
  }
  return "?";
}
inline const char* to_string(NegativeScope s) { return s == NegativeScope::InterView ? "inter_view" : "both_views"; }

struct SamplingSpec {
  std::size_t sample_size = 0;
  int repeats = 1;
  // Adds log(full negatives / sampled negatives) so the sampled value
  // estimates the full-graph loss. Constant, so gradients are unaffected.
  bool count_correction = true;
};

struct LossSpec {
  LossFamily family = LossFamily::Contrast;
  ContrastLevel level = ContrastLevel::NodeLL;
  double temperature = 0.5;
  bool include_positive_in_denominator = true;
  std::optional<NegativeScope> negative_scope;  // unset: both_views for NodeLL, inter_view otherwise
  std::optional<SamplingSpec> sampling;

  NegativeScope scope() const {
    return negative_scope.value_or(level == ContrastLevel::NodeLL ? NegativeScope::BothViews : NegativeScope::InterView);
  }

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("loss: temperature must be > 0");
    if (sampling) {
      if (sampling->sample_size < 2) throw ConfigError("loss: sampling.sample_size must be >= 2");
      if (sampling->repeats < 1) throw ConfigError("loss: sampling.repeats must be >= 1");
    }
  }
};

// Pairwise cosine similarities between rows of u and rows of v.
inline Var cosine_similarity_matrix(const Var& u, const Var& v) {
  if (u.cols() != v.cols()) throw ShapeError("cosine_similarity_matrix: feature dims differ");
  return matmul_nt(row_l2_normalize(u), row_l2_normalize(v));
}

namespace detail {

inline void require_temperature(double t) {
  if (!(t > 0.0)) throw ConfigError("temperature must be > 0");
}

inline void require_aligned(const Var& u, const Var& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols())
    throw ShapeError("contrastive views must be row-aligned with equal widths");
}

// Per-anchor log Σ exp over the negative set (plus the positive when asked).
// s_ab: anchors vs the other view (positives on the diagonal); s_aa: anchors
// vs their own view, used only for both_views.
inline Var denominator_lse(const Var& s_ab, const std::optional<Var>& s_aa, bool include_positive) {
  const Eigen::Index n = s_ab.rows();
  Matrix inter = Matrix::Ones(n, n);
  if (!include_positive) inter.diagonal().setZero();
  if (!s_aa) return masked_row_logsumexp(s_ab, std::move(inter));
  Matrix mask(n, 2 * n);
  mask.leftCols(n) = inter;
  mask.rightCols(n) = Matrix::Ones(n, n) - Matrix::Identity(n, n);
  return masked_row_logsumexp(hconcat(s_ab, *s_aa), std::move(mask));
}

struct ViewSims {
  Var s_uv;                // U Vᵀ / t
  std::optional<Var> s_uu;  // U Uᵀ / t
  std::optional<Var> s_vv;
};

inline ViewSims view_similarities(const Var& u, const Var& v, double t, NegativeScope scope) {
  Var un = row_l2_normalize(u), vn = row_l2_normalize(v);
  ViewSims s{scale(matmul_nt(un, vn), 1.0 / t), std::nullopt, std::nullopt};
  if (scope == NegativeScope::BothViews) {
    s.s_uu = scale(matmul_nt(un, un), 1.0 / t);
    s.s_vv = scale(matmul_nt(vn, vn), 1.0 / t);
  }
  return s;
}

// ½(mean_i lse_u(i) + mean_i lse_v(i)) over the configured denominator set.
inline Var symmetric_uniformity(const ViewSims& s, bool include_positive) {
  Var lse_u = denominator_lse(s.s_uv, s.s_uu, include_positive);
  Var lse_v = denominator_lse(transpose(s.s_uv), s.s_vv, include_positive);
  return scale(add(mean(lse_u), mean(lse_v)), 0.5);
}

}  // namespace detail

// Mean over anchors of −s(u,v)/t.
inline Var alignment_loss(const Var& u, const Var& v, double t) {
  detail::require_temperature(t);
  detail::require_aligned(u, v);
  return scale(mean(row_dot(row_l2_normalize(u), row_l2_normalize(v))), -1.0 / t);
}

// Mean over anchors of log Σ_q exp(s(u,q)/t), every row of `negatives`
// serving as a negative for every anchor.
inline Var uniformity_loss(const Var& anchors, const Var& negatives, double t) {
  detail::require_temperature(t);
  if (negatives.rows() == 0) throw ConfigError("uniformity_loss: empty negative set");
  return mean(row_logsumexp(scale(cosine_similarity_matrix(anchors, negatives), 1.0 / t)));
}

// Uniformity half of the symmetrized two-view objective, over the same
// denominator set info_nce uses.
inline Var view_uniformity_loss(const Var& u, const Var& v, const LossSpec& spec) {
  spec.validate();
  detail::require_aligned(u, v);
  auto s = detail::view_similarities(u, v, spec.temperature, spec.scope());
  return detail::symmetric_uniformity(s, spec.include_positive_in_denominator);
}

// Symmetrized InfoNCE: each view serves once as the anchor set.
inline Var info_nce(const Var& u, const Var& v, const LossSpec& spec) {
  spec.validate();
  detail::require_aligned(u, v);
  auto s = detail::view_similarities(u, v, spec.temperature, spec.scope());
  Var pos = mean(diagonal(s.s_uv));
  return sub(detail::symmetric_uniformity(s, spec.include_positive_in_denominator), pos);
}

// Objective selected by the loss family, over full (unsampled) views.
inline Var contrastive_objective(const Var& u, const Var& v, const LossSpec& spec) {
  switch (spec.family) {
    case LossFamily::Contrast: return info_nce(u, v, spec);
    case LossFamily::NoNeg: return alignment_loss(u, v, spec.temperature);
    case LossFamily::NoPos: {
      LossSpec negatives_only = spec;
      negatives_only.include_positive_in_denominator = false;
      return view_uniformity_loss(u, v, negatives_only);
    }
  }
  throw ConfigError("unknown loss family");
}

// Size of one anchor's denominator set for n aligned rows.
inline double denominator_count(std::size_t n, const LossSpec& spec, bool include_positive) {
  double c = static_cast<double>(n) - (include_positive ? 0.0 : 1.0);
  if (spec.scope() == NegativeScope::BothViews) c += static_cast<double>(n) - 1.0;
  return c;
}

// R independent size-N node subsets; the objective is evaluated on each and
// averaged.
inline Var sampled_objective(const Var& u, const Var& v, const LossSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  if (!spec.sampling) return contrastive_objective(u, v, spec);
  detail::require_aligned(u, v);
  const auto n = static_cast<std::size_t>(u.rows());
  const SamplingSpec& smp = *spec.sampling;
  if (smp.sample_size > n)
    throw ConfigError("sampling: sample_size " + std::to_string(smp.sample_size) + " exceeds node count " +
                      std::to_string(n));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::optional<Var> total;
  for (int r = 0; r < smp.repeats; ++r) {
    std::vector<std::size_t> idx;
    idx.reserve(smp.sample_size);
    std::sample(all.begin(), all.end(), std::back_inserter(idx), smp.sample_size, rng);
    Var l = contrastive_objective(gather_rows(u, idx), gather_rows(v, idx), spec);
    total = total ? add(*total, l) : l;
  }
  Var loss = scale(*total, 1.0 / smp.repeats);
  if (smp.count_correction && spec.family != LossFamily::NoNeg && smp.sample_size < n) {
    bool incl = spec.family == LossFamily::Contrast && spec.include_positive_in_denominator;
    double shift = std::log(denominator_count(n, spec, incl) / denominator_count(smp.sample_size, spec, incl));
    Tape& t = *u.tape();
    loss = add(loss, t.constant(Matrix::Constant(1, 1, shift)));
  }
  return loss;
}

inline Var sampled_info_nce(const Var& u, const Var& v, const LossSpec& spec, std::mt19937_64& rng) {
  if (!spec.sampling) throw ConfigError("sampled_info_nce: loss spec has no sampling section");
  LossSpec s = spec;
  s.family = LossFamily::Contrast;
  return sampled_objective(u, v, s, rng);
}

// −tr(HÂHᵀ)/c = −Σ P(x,x⁺) h_xᵀh_{x⁺}; regularized adds ‖H‖²/c.
inline Var neighbor_alignment_loss(const Var& h, const PairDistribution& p, bool regularized) {
  if (static_cast<std::size_t>(h.rows()) != p.joint.rows) throw ShapeError("neighbor_alignment: rows != node count");
  Var loss = scale(sum(hadamard(h, spmm(p.joint, h))), -1.0);
  if (regularized) loss = add(loss, scale(squared_norm(h), 1.0 / p.mass));
  return loss;
}

// Σ_x P(x) log Σ_x' P(x') exp(h_xᵀh_x')
inline Var neighbor_uniformity_loss(const Var& h, const PairDistribution& p) {
  if (h.rows() != p.marginal.size()) throw ShapeError("neighbor_uniformity: rows != node count");
  Vector logp = p.marginal.array().log();
  return sum(scale_rows(row_logsumexp(add_row_broadcast(matmul_nt(h, h), logp)), p.marginal));
}

// Alignment (negative-sign convention, as in the update H + ÂH − αDÃH) plus
// uniformity.
inline Var neighbor_contrast_loss(const Var& h, const PairDistribution& p, bool regularized = false) {
  return add(neighbor_alignment_loss(h, p, regularized), neighbor_uniformity_loss(h, p));
}

// −(1/M) Σ_i (1/N_i) Σ_{u∈G_i} s(u, v): node alignment averaged within each
// graph, then across graphs.
inline Var graph_node_ll_alignment(const Var& z1, const Var& z2, const GraphBatch& batch) {
  const auto rows = static_cast<std::size_t>(z1.rows());
  if (rows != batch.num_nodes() || static_cast<std::size_t>(z2.rows()) != batch.num_nodes())
    throw ConfigError("graph_node_ll_alignment: views lost node correspondence (" + std::to_string(z1.rows()) +
                      " and " + std::to_string(z2.rows()) + " rows for " + std::to_string(batch.num_nodes()) +
                      " nodes)");
  if (z1.cols() != z2.cols()) throw ShapeError("graph_node_ll_alignment: widths differ");
  Vector inv(static_cast<Eigen::Index>(batch.num_graphs()));
  for (std::size_t g = 0; g < batch.num_graphs(); ++g) {
    if (batch.graph_size(g) == 0) throw DataError("graph_node_ll_alignment: empty graph in batch");
    inv(static_cast<Eigen::Index>(g)) = 1.0 / static_cast<double>(batch.graph_size(g));
  }
  Var cos = row_dot(row_l2_normalize(z1), row_l2_normalize(z2));
  Var per_graph = scale_rows(segment_sum(cos, batch.graph_assignment, batch.num_graphs()), inv);
  return scale(mean(per_graph), -1.0);
}

}  // namespace gcl
