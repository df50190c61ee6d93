#pragma once

#include <string>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/graphcore/batch.hpp"
#include "gcllab/graphcore/normalize.hpp"
#include "gcllab/models/params.hpp"
#include "gcllab/models/spec.hpp"
#include "gcllab/numkit/ops.hpp"

namespace gcl {

// CN(H) = H − α·diag(d)·row_softmax(HHᵀ)·H
inline Var contranorm(const Var& h, double alpha, const Vector& d) {
  if (!(alpha >= 0.0)) throw ConfigError("contranorm: alpha must be >= 0");
  if (d.size() != h.rows()) throw ShapeError("contranorm: degree vector length != rows");
  if ((d.array() < 0.0).any()) throw ConfigError("contranorm: negative degree weight");
  if (alpha == 0.0) return h;
  Var s = row_softmax(matmul_nt(h, h));
  return sub(h, scale(scale_rows(matmul(s, h), d), alpha));
}

inline Vector contranorm_weights(DegreeMode mode, const GraphContext* ctx, Eigen::Index n) {
  if (mode == DegreeMode::Identity) return Vector::Constant(n, 1.0 / static_cast<double>(n));
  if (!ctx) throw ConfigError("contranorm: pair_marginal mode needs a graph");
  if (ctx->marginal.size() != n) throw ShapeError("contranorm: marginal length != rows");
  return ctx->marginal;
}

namespace detail {

inline Var layer_tail(const EncoderSpec& spec, int l, Var h, const GraphContext* ctx) {
  if (l < spec.num_layers - 1 || spec.final_activation) h = relu(h);
  if (spec.contranorm)
    h = contranorm(h, spec.contranorm->alpha, contranorm_weights(spec.contranorm->degree_mode, ctx, h.rows()));
  return h;
}

inline void check_input(const EncoderSpec& spec, const BoundParams& p, const Var& x) {
  const std::string first = spec.kind == EncoderKind::GIN ? gin_name(0, "w1") : "enc.w0";
  if (x.cols() != p.get(first).rows())
    throw ShapeError("encoder: input has " + std::to_string(x.cols()) + " features, weights expect " +
                     std::to_string(p.get(first).rows()));
}

}  // namespace detail

// H^{(l+1)} = σ(Â H^{(l)} W^{(l)}), no activation on the last layer.
inline Var gcn_forward(const EncoderSpec& spec, const BoundParams& p, const GraphContext& ctx, const Var& x) {
  detail::check_input(spec, p, x);
  if (static_cast<std::size_t>(x.rows()) != ctx.n) throw ShapeError("gcn: feature rows != node count");
  Var h = x;
  for (int l = 0; l < spec.num_layers; ++l) {
    Var w = p.get("enc.w" + std::to_string(l));
    // Â(HW) is cheaper than (ÂH)W when the layer narrows the width.
    h = w.cols() < w.rows() ? spmm(ctx.norm_adj.matrix, matmul(h, w)) : matmul(spmm(ctx.norm_adj.matrix, h), w);
    h = detail::layer_tail(spec, l, h, &ctx);
  }
  return h;
}

// h_i ← MLP((1+ε)h_i + Σ_{j∈N(i)} h_j) with a 2-layer MLP per layer.
inline Var gin_forward(const EncoderSpec& spec, const BoundParams& p, const GraphContext& ctx, const Var& x) {
  detail::check_input(spec, p, x);
  if (static_cast<std::size_t>(x.rows()) != ctx.n) throw ShapeError("gin: feature rows != node count");
  Var h = x;
  for (int l = 0; l < spec.num_layers; ++l) {
    Var agg = add(add(h, scale_by(h, p.get(gin_name(l, "eps")))), spmm(ctx.adjacency, h));
    h = matmul(relu(matmul(agg, p.get(gin_name(l, "w1")))), p.get(gin_name(l, "w2")));
    h = detail::layer_tail(spec, l, h, &ctx);
  }
  return h;
}

// Per-row MLP. The context is only consulted for ContraNorm weights.
inline Var mlp_forward(const EncoderSpec& spec, const BoundParams& p, const Var& x, const GraphContext* ctx = nullptr) {
  detail::check_input(spec, p, x);
  Var h = x;
  for (int l = 0; l < spec.num_layers; ++l) {
    h = matmul(h, p.get("enc.w" + std::to_string(l)));
    h = detail::layer_tail(spec, l, h, ctx);
  }
  return h;
}

inline Var encode(const EncoderSpec& spec, const BoundParams& p, const GraphContext& ctx, const Var& x) {
  switch (spec.kind) {
    case EncoderKind::GCN: return gcn_forward(spec, p, ctx, x);
    case EncoderKind::GIN: return gin_forward(spec, p, ctx, x);
    case EncoderKind::MLP: return mlp_forward(spec, p, x, &ctx);
  }
  throw ConfigError("unknown encoder kind");
}

// Z = relu(H W1) W2, or H itself when the head is disabled.
inline Var projection_forward(const ProjectionSpec& spec, const BoundParams& p, const Var& h) {
  if (!spec.enabled) return h;
  Var w1 = p.get("proj.w1");
  if (h.cols() != w1.rows()) throw ShapeError("projection: input width mismatch");
  return matmul(relu(matmul(h, w1)), p.get("proj.w2"));
}

// Per-graph sum or mean of node rows.
inline Var readout(const Var& z, const GraphBatch& batch, ReadoutMode mode) {
  if (static_cast<std::size_t>(z.rows()) != batch.num_nodes()) throw ShapeError("readout: row count != batch nodes");
  Vector counts(static_cast<Eigen::Index>(batch.num_graphs()));
  for (std::size_t g = 0; g < batch.num_graphs(); ++g) {
    if (batch.graph_size(g) == 0) throw DataError("readout: empty graph " + std::to_string(g) + " in batch");
    counts(static_cast<Eigen::Index>(g)) = static_cast<double>(batch.graph_size(g));
  }
  Var pooled = segment_sum(z, batch.graph_assignment, batch.num_graphs());
  if (mode == ReadoutMode::Mean) pooled = scale_rows(pooled, counts.cwiseInverse());
  return pooled;
}

// Forward pass on a graph without recording gradients; returns (H, Z).
inline std::pair<Matrix, Matrix> embed(const EncoderSpec& enc, const ProjectionSpec& proj, const ModelParams& params,
                                       const Graph& g) {
  Tape tape;
  BoundParams bp = bind(tape, params, false);
  GraphContext ctx = make_context(g);
  Var h = encode(enc, bp, ctx, tape.constant(g.features));
  Var z = projection_forward(proj, bp, h);
  return {h.value(), z.value()};
}

}  // namespace gcl
