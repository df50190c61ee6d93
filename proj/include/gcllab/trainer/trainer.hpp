#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gcllab/augment/augment.hpp"
#include "gcllab/diagnostics/diagnostics.hpp"
#include "gcllab/errors.hpp"
#include "gcllab/evalkit/probe.hpp"
#include "gcllab/graphcore/batch.hpp"
#include "gcllab/graphcore/normalize.hpp"
#include "gcllab/graphcore/split.hpp"
#include "gcllab/losses/losses.hpp"
#include "gcllab/models/encoders.hpp"
#include "gcllab/models/params.hpp"
#include "gcllab/numkit/optim.hpp"
#include "gcllab/trainer/report.hpp"

namespace gcl {

struct EvalConfig {
  bool enabled = true;
  ProbeConfig probe;               // node tasks: logistic by default
  double train_ratio = 0.8;
  double test_ratio = 0.1;
  int cv_folds = 10;               // graph tasks
  int inner_folds = 5;
  ProbeLoss graph_probe_loss = ProbeLoss::Hinge;
};

struct TrainConfig {
  EncoderSpec encoder;
  ProjectionSpec projection;
  LossSpec loss;
  AugmentPipeline aug1;
  AugmentPipeline aug2;
  double lr = 0.01;
  int epochs = 200;
  std::uint64_t seed = 0;
  int log_every = 1;
  std::size_t batch_size = 0;  // graph tasks; 0 = every graph in one batch
  bool track_metrics = true;   // measure H/Z geometry at each logged epoch
  EvalConfig eval;
  std::string dataset;

  void validate() const {
    encoder.validate();
    projection.validate();
    loss.validate();
    for (const auto& a : aug1) a.validate();
    for (const auto& a : aug2) a.validate();
    if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (log_every < 1) throw ConfigError("train: log_every must be >= 1");
  }
};

struct TrainResult {
  ModelParams params;
  RunReport report;
};

namespace detail {

inline std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x67636cu};
  return std::mt19937_64(seq);
}

inline void step_params(ModelParams& p, const Tape& tape, const BoundParams& bp, AdamState& adam) {
  std::vector<Matrix> grads;
  grads.reserve(p.size());
  for (const Var& v : bp.vars) grads.push_back(tape.grad(v));
  adam_step(adam, std::span<Matrix>(p.values), std::span<const Matrix>(grads));
}

inline void record_point(RunReport& r, int epoch, double loss, const ModelParams& p,
                         const std::optional<RepresentationMetrics>& m) {
  r.logged_epochs.push_back(epoch);
  r.loss.push_back(loss);
  if (m) {
    r.sim_h.push_back(m->sim_h);
    r.sim_z.push_back(m->sim_z);
    r.rank_h.push_back(m->rank_h);
    r.rank_z.push_back(m->rank_z);
  }
  auto norms = weight_norms(p);
  if (r.weight_norms.empty())
    for (const auto& [name, v] : norms) r.weight_norms.push_back({name, {}});
  for (std::size_t i = 0; i < norms.size(); ++i) r.weight_norms[i].second.push_back(norms[i].second);
}

inline bool is_logged(int epoch, int epochs, int log_every) { return epoch % log_every == 0 || epoch == epochs - 1; }

}  // namespace detail

// Clean-graph embeddings used for measurement and evaluation.
struct GraphLevelEmbedding {
  Matrix h;  // pooled encoder output, one row per graph
  Matrix z;  // projected: g(readout H) for GraphGG, readout(g(H)) for GraphNodeLL
};

inline GraphLevelEmbedding embed_graphs(const TrainConfig& cfg, const ModelParams& params, const GraphBatch& batch) {
  Tape tape;
  BoundParams bp = bind(tape, params, false);
  GraphContext ctx = make_context(batch.merged);
  Var h = encode(cfg.encoder, bp, ctx, tape.constant(batch.merged.features));
  Var pooled = readout(h, batch, cfg.encoder.readout);
  Var z = cfg.loss.level == ContrastLevel::GraphNodeLL ? readout(projection_forward(cfg.projection, bp, h), batch, cfg.encoder.readout)
                                                      : projection_forward(cfg.projection, bp, pooled);
  return {pooled.value(), z.value()};
}

inline void validate_node_config(const TrainConfig& cfg, const Graph& g) {
  cfg.validate();
  if (cfg.loss.level != ContrastLevel::NodeLL)
    throw ConfigError(std::string("train_node_gcl: loss level ") + to_string(cfg.loss.level) + " needs graph-level training");
  if (!preserves_nodes(cfg.aug1) || !preserves_nodes(cfg.aug2))
    throw ConfigError("train_node_gcl: node-level loss needs node-preserving augmentations (no subgraph/node_drop)");
  if (g.n < 2 && cfg.loss.family != LossFamily::NoNeg) throw ConfigError("train_node_gcl: negatives need >= 2 nodes");
  if (g.feature_dim() == 0) throw DataError("train_node_gcl: graph has no features");
}

// Node-level training on one graph. Each epoch draws two fresh views from a
// generator seeded by (seed, epoch), encodes and projects both, and takes one
// Adam step. Logged loss and metrics are pre-update values of that epoch.
inline TrainResult train_node_gcl(const TrainConfig& cfg, const Graph& g) {
  validate_node_config(cfg, g);
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult out;
  out.params = init_params(cfg.encoder, cfg.projection, static_cast<int>(g.feature_dim()), cfg.seed);
  RunReport& rep = out.report;
  rep.seed = cfg.seed;
  rep.epochs = cfg.epochs;
  rep.log_every = cfg.log_every;
  AdamState adam(AdamConfig{.lr = cfg.lr});

  auto measure = [&](const ModelParams& p) {
    auto [h, z] = embed(cfg.encoder, cfg.projection, p, g);
    return measure_representations(h, z);
  };

  for (int e = 0; e < cfg.epochs; ++e) {
    std::mt19937_64 rng = detail::epoch_rng(cfg.seed, e);
    AugmentedGraph v1 = apply_pipeline(cfg.aug1, g, rng);
    AugmentedGraph v2 = apply_pipeline(cfg.aug2, g, rng);
    Tape tape;
    BoundParams bp = bind(tape, out.params);
    GraphContext c1 = make_context(v1.graph), c2 = make_context(v2.graph);
    Var z1 = projection_forward(cfg.projection, bp, encode(cfg.encoder, bp, c1, tape.constant(v1.graph.features)));
    Var z2 = projection_forward(cfg.projection, bp, encode(cfg.encoder, bp, c2, tape.constant(v2.graph.features)));
    Var loss = sampled_objective(z1, z2, cfg.loss, rng);
    if (!std::isfinite(loss.scalar())) throw DomainError("train_node_gcl: non-finite loss at epoch " + std::to_string(e));
    if (detail::is_logged(e, cfg.epochs, cfg.log_every)) {
      std::optional<RepresentationMetrics> m;
      if (cfg.track_metrics) m = measure(out.params);
      detail::record_point(rep, e, loss.scalar(), out.params, m);
    }
    tape.backward(loss);
    detail::step_params(out.params, tape, bp, adam);
  }

  rep.has_final = true;
  rep.final_metrics = measure(out.params);
  rep.final_weight_norms = weight_norms(out.params);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline void validate_graph_config(const TrainConfig& cfg, const std::vector<Graph>& graphs) {
  cfg.validate();
  if (graphs.empty()) throw DataError("train_graph_gcl: empty dataset");
  if (cfg.loss.level == ContrastLevel::NodeLL) throw ConfigError("train_graph_gcl: node-level loss needs train_node_gcl");
  if (cfg.loss.level == ContrastLevel::GraphNodeLL) {
    if (cfg.loss.family != LossFamily::NoNeg)
      throw ConfigError("train_graph_gcl: graph node-level loss is defined for the alignment-only (NoNeg) family");
    if (!preserves_nodes(cfg.aug1) || !preserves_nodes(cfg.aug2))
      throw ConfigError("train_graph_gcl: graph node-level alignment needs node-preserving augmentations");
  }
  const std::size_t per_batch = cfg.batch_size == 0 ? graphs.size() : std::min(cfg.batch_size, graphs.size());
  if (cfg.loss.family != LossFamily::NoNeg && per_batch < 2)
    throw ConfigError("train_graph_gcl: negatives need >= 2 graphs per batch");
  if (cfg.loss.sampling && cfg.loss.sampling->sample_size > per_batch)
    throw ConfigError("train_graph_gcl: sampling.sample_size exceeds graphs per batch");
}

// Graph-level training. Each graph is augmented twice per epoch; GraphGG
// contrasts projected pooled vectors, GraphNodeLL aligns projected node
// embeddings within each graph. Batches are reshuffled every epoch; the
// logged loss is the mean pre-update batch loss.
inline TrainResult train_graph_gcl(const TrainConfig& cfg, const std::vector<Graph>& graphs) {
  validate_graph_config(cfg, graphs);
  const auto t0 = std::chrono::steady_clock::now();
  const GraphBatch clean = batch_graphs(graphs);
  TrainResult out;
  out.params = init_params(cfg.encoder, cfg.projection, static_cast<int>(clean.merged.feature_dim()), cfg.seed);
  RunReport& rep = out.report;
  rep.seed = cfg.seed;
  rep.epochs = cfg.epochs;
  rep.log_every = cfg.log_every;
  AdamState adam(AdamConfig{.lr = cfg.lr});
  const std::size_t per_batch = cfg.batch_size == 0 ? graphs.size() : std::min(cfg.batch_size, graphs.size());

  auto measure = [&](const ModelParams& p) {
    auto e = embed_graphs(cfg, p, clean);
    return measure_representations(e.h, e.z);
  };

  for (int e = 0; e < cfg.epochs; ++e) {
    std::mt19937_64 rng = detail::epoch_rng(cfg.seed, e);
    std::vector<std::size_t> order(graphs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (per_batch < graphs.size()) std::shuffle(order.begin(), order.end(), rng);
    std::optional<RepresentationMetrics> m;
    if (cfg.track_metrics && detail::is_logged(e, cfg.epochs, cfg.log_every)) m = measure(out.params);
    const ModelParams before = out.params;
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += per_batch) {
      const std::size_t stop = std::min(order.size(), start + per_batch);
      if (stop - start < 2 && cfg.loss.family != LossFamily::NoNeg) continue;  // ragged tail without negatives
      std::vector<Graph> views1, views2;
      for (std::size_t k = start; k < stop; ++k) {
        views1.push_back(apply_pipeline(cfg.aug1, graphs[order[k]], rng).graph);
        views2.push_back(apply_pipeline(cfg.aug2, graphs[order[k]], rng).graph);
      }
      GraphBatch b1 = batch_graphs(std::move(views1)), b2 = batch_graphs(std::move(views2));
      Tape tape;
      BoundParams bp = bind(tape, out.params);
      GraphContext c1 = make_context(b1.merged), c2 = make_context(b2.merged);
      Var h1 = encode(cfg.encoder, bp, c1, tape.constant(b1.merged.features));
      Var h2 = encode(cfg.encoder, bp, c2, tape.constant(b2.merged.features));
      Var loss = [&] {
        if (cfg.loss.level == ContrastLevel::GraphNodeLL)
          return graph_node_ll_alignment(projection_forward(cfg.projection, bp, h1),
                                         projection_forward(cfg.projection, bp, h2), b1);
        Var z1 = projection_forward(cfg.projection, bp, readout(h1, b1, cfg.encoder.readout));
        Var z2 = projection_forward(cfg.projection, bp, readout(h2, b2, cfg.encoder.readout));
        return sampled_objective(z1, z2, cfg.loss, rng);
      }();
      if (!std::isfinite(loss.scalar())) throw DomainError("train_graph_gcl: non-finite loss at epoch " + std::to_string(e));
      loss_sum += loss.scalar();
      ++batches;
      tape.backward(loss);
      detail::step_params(out.params, tape, bp, adam);
    }
    if (detail::is_logged(e, cfg.epochs, cfg.log_every))
      detail::record_point(rep, e, batches ? loss_sum / batches : 0.0, before, m);
  }

  rep.has_final = true;
  rep.final_metrics = measure(out.params);
  rep.final_weight_norms = weight_norms(out.params);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// A dataset for training: one graph with node labels for node tasks, or a
// list of labelled graphs for graph tasks.
struct Dataset {
  std::vector<Graph> graphs;
  std::string name;
};

inline bool is_node_task(const TrainConfig& cfg) { return cfg.loss.level == ContrastLevel::NodeLL; }

// Probe accuracy of the frozen encoder output H on the clean data.
inline double evaluate(const TrainConfig& cfg, const ModelParams& params, const Dataset& data) {
  if (is_node_task(cfg)) {
    if (data.graphs.size() != 1) throw DataError("evaluate: node task needs exactly one graph");
    const Graph& g = data.graphs.front();
    if (!g.labels) throw DataError("evaluate: graph has no node labels");
    Split s = random_split(g.n, cfg.eval.train_ratio, cfg.eval.test_ratio, cfg.seed);
    Matrix h = embed(cfg.encoder, cfg.projection, params, g).first;
    ProbeConfig pc = cfg.eval.probe;
    pc.seed = cfg.seed;
    return linear_probe(select_rows(h, s.train_idx), select_labels(*g.labels, s.train_idx), select_rows(h, s.test_idx),
                        select_labels(*g.labels, s.test_idx), pc)
        .accuracy;
  }
  GraphBatch b = batch_graphs(data.graphs);
  Matrix h = embed_graphs(cfg, params, b).h;
  ProbeConfig pc = cfg.eval.probe;
  pc.loss = cfg.eval.graph_probe_loss;
  pc.seed = cfg.seed;
  return cross_validated_probe(h, b.graph_labels(), pc, cfg.eval.cv_folds, cfg.eval.inner_folds).mean_accuracy;
}

inline TrainResult train(const TrainConfig& cfg, const Dataset& data) {
  if (is_node_task(cfg)) {
    if (data.graphs.size() != 1) throw DataError("train: node task needs exactly one graph");
    return train_node_gcl(cfg, data.graphs.front());
  }
  return train_graph_gcl(cfg, data.graphs);
}

struct SeedRun {
  std::uint64_t seed = 0;
  ModelParams params;
  RunReport report;
  std::optional<double> accuracy;
};

struct MultiSeedResult {
  std::vector<SeedRun> runs;  // in the order the seeds were given
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample std; 0 for a single run
};

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

// Independent runs, one per seed, on at most `workers` threads. Runs share
// only read-only inputs; results are placed by seed position so the output
// does not depend on scheduling.
inline MultiSeedResult multi_seed(const TrainConfig& cfg, const Dataset& data, const std::vector<std::uint64_t>& seeds,
                                  unsigned workers = 1) {
  if (seeds.empty()) throw PreconditionError("multi_seed: empty seed list");
  cfg.validate();
  MultiSeedResult res;
  res.runs.resize(seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        TrainConfig c = cfg;
        c.seed = seeds[i];
        TrainResult tr = train(c, data);
        SeedRun& r = res.runs[i];
        r.seed = seeds[i];
        if (c.eval.enabled) {
          r.accuracy = evaluate(c, tr.params, data);
          tr.report.probe_accuracy = r.accuracy;
        }
        r.params = std::move(tr.params);
        r.report = std::move(tr.report);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(seeds.size())));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<double> acc;
  for (const auto& r : res.runs)
    if (r.accuracy) acc.push_back(*r.accuracy);
  std::tie(res.mean_accuracy, res.std_accuracy) = mean_std(acc);
  return res;
}

}  // namespace gcl
