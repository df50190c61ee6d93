#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gcllab/errors.hpp"
#include "gcllab/graphcore/io.hpp"
#include "gcllab/graphcore/synthetic.hpp"
#include "gcllab/trainer/trainer.hpp"

namespace gcl {

using nlohmann::json;

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class JsonSection {
 public:
  JsonSection(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return required<T>(key);
  }

  template <class T>
  T required(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(path_ + ": missing key '" + key + "'");
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(path_ + "." + key + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(path_ + "." + key + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
            throw ConfigError(path_ + "." + key + ": expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(path_ + "." + key + ": expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(path_ + "." + key + ": expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(path_ + ": missing key '" + key + "'");
    return j_.at(key);
  }

  std::string child(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class E, std::size_t N>
E parse_enum(const std::string& s, const std::pair<const char*, E> (&table)[N], const std::string& where) {
  std::string options;
  for (const auto& [name, value] : table) {
    if (s == name) return value;
    options += std::string(options.empty() ? "" : ", ") + name;
  }
  throw ConfigError(where + ": unknown value '" + s + "' (expected one of " + options + ")");
}

struct DatasetConfig {
  std::string kind = "sbm";  // sbm | graph_set | file | content_cites
  std::string name;
  SbmParams sbm;
  GraphSetParams graph_set;
  std::string path;
  std::string content;
  std::string cites;
};

struct LossVariant {
  std::string label;
  LossSpec spec;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  TrainConfig train;  // loss field holds the first variant
  std::vector<LossVariant> losses;
  std::vector<std::uint64_t> seeds = {0};
  std::string output_dir = "runs/experiment";
  std::string name;
};

inline const char* default_loss_label(LossFamily f) {
  switch (f) {
    case LossFamily::Contrast: return "Contrast";
    case LossFamily::NoPos: return "NoPos";
    case LossFamily::NoNeg: return "NoNeg";
  }
  return "?";
}

inline DatasetConfig parse_dataset(const json& j) {
  JsonSection s(j, "dataset");
  DatasetConfig d;
  d.kind = s.get<std::string>("kind", "sbm");
  if (d.kind == "sbm") {
    SbmParams& p = d.sbm;
    p.n = s.get<std::size_t>("n", p.n);
    p.num_classes = s.get<int>("classes", p.num_classes);
    p.p_in = s.get<double>("p_in", p.p_in);
    p.p_out = s.get<double>("p_out", p.p_out);
    p.feature_dim = s.get<std::size_t>("feature_dim", p.feature_dim);
    p.feature_noise = s.get<double>("noise", p.feature_noise);
    p.seed = s.get<std::uint64_t>("seed", p.seed);
  } else if (d.kind == "graph_set") {
    GraphSetParams& p = d.graph_set;
    p.num_graphs = s.get<std::size_t>("num_graphs", p.num_graphs);
    p.min_nodes = s.get<std::size_t>("min_nodes", p.min_nodes);
    p.max_nodes = s.get<std::size_t>("max_nodes", p.max_nodes);
    p.num_node_types = s.get<int>("node_types", p.num_node_types);
    p.type_bias = s.get<double>("type_bias", p.type_bias);
    p.seed = s.get<std::uint64_t>("seed", p.seed);
  } else if (d.kind == "file") {
    d.path = s.required<std::string>("path");
  } else if (d.kind == "content_cites") {
    d.content = s.required<std::string>("content");
    d.cites = s.required<std::string>("cites");
  } else {
    throw ConfigError("dataset.kind: unknown value '" + d.kind + "' (expected sbm, graph_set, file, content_cites)");
  }
  d.name = s.get<std::string>("name", d.kind);
  s.finish();
  return d;
}

inline EncoderSpec parse_encoder(const json& j) {
  static const std::pair<const char*, EncoderKind> kinds[] = {
      {"gcn", EncoderKind::GCN}, {"gin", EncoderKind::GIN}, {"mlp", EncoderKind::MLP}};
  static const std::pair<const char*, ReadoutMode> readouts[] = {{"sum", ReadoutMode::Sum}, {"mean", ReadoutMode::Mean}};
  static const std::pair<const char*, DegreeMode> degrees[] = {{"pair_marginal", DegreeMode::PairMarginal},
                                                               {"identity", DegreeMode::Identity}};
  JsonSection s(j, "encoder");
  EncoderSpec e;
  e.kind = parse_enum(s.get<std::string>("kind", "gcn"), kinds, "encoder.kind");
  e.num_layers = s.get<int>("layers", e.num_layers);
  e.hidden_dim = s.get<int>("hidden_dim", e.hidden_dim);
  e.output_dim = s.get<int>("output_dim", e.output_dim);
  e.final_activation = s.get<bool>("final_activation", e.final_activation);
  e.readout = parse_enum(s.get<std::string>("readout", "sum"), readouts, "encoder.readout");
  if (s.has("contranorm")) {
    const json& cj = s.raw("contranorm");
    if (!cj.is_null()) {
      JsonSection c(cj, "encoder.contranorm");
      ContraNormSpec cn;
      cn.alpha = c.get<double>("alpha", cn.alpha);
      cn.degree_mode = parse_enum(c.get<std::string>("degree_mode", "pair_marginal"), degrees, "encoder.contranorm.degree_mode");
      c.finish();
      e.contranorm = cn;
    }
  }
  s.finish();
  e.validate();
  return e;
}

inline ProjectionSpec parse_projection(const json& j) {
  JsonSection s(j, "projection");
  ProjectionSpec p;
  p.enabled = s.get<bool>("enabled", p.enabled);
  p.hidden_dim = s.get<int>("hidden_dim", p.hidden_dim);
  p.out_dim = s.get<int>("out_dim", p.out_dim);
  s.finish();
  p.validate();
  return p;
}

inline LossVariant parse_loss(const json& j, const std::string& where) {
  static const std::pair<const char*, LossFamily> families[] = {
      {"contrast", LossFamily::Contrast}, {"no_pos", LossFamily::NoPos}, {"no_neg", LossFamily::NoNeg}};
  static const std::pair<const char*, ContrastLevel> levels[] = {{"node_ll", ContrastLevel::NodeLL},
                                                                 {"graph_gg", ContrastLevel::GraphGG},
                                                                 {"graph_node_ll", ContrastLevel::GraphNodeLL}};
  static const std::pair<const char*, NegativeScope> scopes[] = {{"inter_view", NegativeScope::InterView},
                                                                 {"both_views", NegativeScope::BothViews}};
  JsonSection s(j, where);
  LossVariant v;
  LossSpec& l = v.spec;
  l.family = parse_enum(s.get<std::string>("family", "contrast"), families, where + ".family");
  l.level = parse_enum(s.get<std::string>("level", "node_ll"), levels, where + ".level");
  l.temperature = s.get<double>("temperature", l.temperature);
  l.include_positive_in_denominator = s.get<bool>("include_positive", l.include_positive_in_denominator);
  if (s.has("negative_scope")) l.negative_scope = parse_enum(s.required<std::string>("negative_scope"), scopes, where + ".negative_scope");
  if (s.has("sampling")) {
    JsonSection smp(s.raw("sampling"), where + ".sampling");
    SamplingSpec sp;
    sp.sample_size = smp.required<std::size_t>("sample_size");
    sp.repeats = smp.get<int>("repeats", sp.repeats);
    sp.count_correction = smp.get<bool>("count_correction", sp.count_correction);
    smp.finish();
    l.sampling = sp;
  }
  v.label = s.get<std::string>("label", default_loss_label(l.family));
  s.finish();
  l.validate();
  return v;
}

inline AugmentSpec parse_augment(const json& j, const std::string& where) {
  static const std::pair<const char*, AugmentKind> kinds[] = {
      {"identity", AugmentKind::Identity},          {"feature_mask", AugmentKind::FeatureMask},
      {"edge_perturb", AugmentKind::EdgePerturb},   {"gaussian_noise", AugmentKind::GaussianNoise},
      {"subgraph_sample", AugmentKind::SubgraphSample}, {"node_drop", AugmentKind::NodeDrop}};
  JsonSection s(j, where);
  AugmentSpec a;
  a.kind = parse_enum(s.required<std::string>("kind"), kinds, where + ".kind");
  switch (a.kind) {
    case AugmentKind::Identity: break;
    case AugmentKind::FeatureMask:
      a.p = s.required<double>("p");
      a.per_entry = s.get<bool>("per_entry", false);
      break;
    case AugmentKind::EdgePerturb:
    case AugmentKind::NodeDrop: a.p = s.required<double>("p"); break;
    case AugmentKind::GaussianNoise: a.sigma = s.required<double>("sigma"); break;
    case AugmentKind::SubgraphSample: a.ratio = s.required<double>("ratio"); break;
  }
  s.finish();
  a.validate();
  return a;
}

inline AugmentPipeline parse_pipeline(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of augmentation stages");
  AugmentPipeline out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_augment(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline ProbeConfig parse_probe(const json& j, ProbeConfig p) {
  static const std::pair<const char*, ProbeLoss> losses[] = {{"logistic", ProbeLoss::Logistic}, {"hinge", ProbeLoss::Hinge}};
  static const std::pair<const char*, ProbeOptimizer> opts[] = {{"gd", ProbeOptimizer::Plain}, {"adam", ProbeOptimizer::Adam}};
  JsonSection s(j, "eval.probe");
  if (s.has("loss")) p.loss = parse_enum(s.required<std::string>("loss"), losses, "eval.probe.loss");
  p.lr = s.get<double>("lr", p.lr);
  p.epochs = s.get<int>("epochs", p.epochs);
  p.l2 = s.get<double>("l2", p.l2);
  if (s.has("optimizer")) p.optimizer = parse_enum(s.required<std::string>("optimizer"), opts, "eval.probe.optimizer");
  p.normalize_rows = s.get<bool>("normalize_rows", p.normalize_rows);
  s.finish();
  p.validate();
  return p;
}

inline EvalConfig parse_eval(const json& j) {
  static const std::pair<const char*, ProbeLoss> losses[] = {{"logistic", ProbeLoss::Logistic}, {"hinge", ProbeLoss::Hinge}};
  JsonSection s(j, "eval");
  EvalConfig e;
  e.enabled = s.get<bool>("enabled", e.enabled);
  if (s.has("probe")) e.probe = parse_probe(s.raw("probe"), e.probe);
  e.train_ratio = s.get<double>("train_ratio", e.train_ratio);
  e.test_ratio = s.get<double>("test_ratio", e.test_ratio);
  e.cv_folds = s.get<int>("cv_folds", e.cv_folds);
  e.inner_folds = s.get<int>("inner_folds", e.inner_folds);
  if (s.has("graph_probe_loss"))
    e.graph_probe_loss = parse_enum(s.required<std::string>("graph_probe_loss"), losses, "eval.graph_probe_loss");
  s.finish();
  if (e.cv_folds < 2 || e.inner_folds < 2) throw ConfigError("eval: fold counts must be >= 2");
  if (!(e.train_ratio > 0.0 && e.test_ratio > 0.0 && e.train_ratio + e.test_ratio <= 1.0))
    throw ConfigError("eval: need train_ratio, test_ratio > 0 with sum <= 1");
  return e;
}

// Every key is checked; anything unrecognized is a ConfigError.
inline ExperimentConfig parse_experiment_config(const json& j) {
  JsonSection s(j, "config");
  ExperimentConfig c;
  c.name = s.get<std::string>("name", "");
  c.dataset = parse_dataset(s.raw("dataset"));
  if (s.has("encoder")) c.train.encoder = parse_encoder(s.raw("encoder"));
  if (s.has("projection")) c.train.projection = parse_projection(s.raw("projection"));
  if (s.has("loss")) {
    const json& lj = s.raw("loss");
    if (lj.is_array()) {
      if (lj.empty()) throw ConfigError("loss: empty sweep");
      for (std::size_t i = 0; i < lj.size(); ++i) c.losses.push_back(parse_loss(lj[i], "loss[" + std::to_string(i) + "]"));
    } else {
      c.losses.push_back(parse_loss(lj, "loss"));
    }
  } else {
    c.losses.push_back({default_loss_label(LossFamily::Contrast), LossSpec{}});
  }
  std::set<std::string> labels;
  for (const auto& v : c.losses)
    if (!labels.insert(v.label).second) throw ConfigError("loss: duplicate label '" + v.label + "'");
  c.train.loss = c.losses.front().spec;
  if (s.has("augment")) {
    JsonSection a(s.raw("augment"), "augment");
    if (a.has("view1")) c.train.aug1 = parse_pipeline(a.raw("view1"), "augment.view1");
    if (a.has("view2")) c.train.aug2 = parse_pipeline(a.raw("view2"), "augment.view2");
    a.finish();
  }
  if (s.has("train")) {
    JsonSection t(s.raw("train"), "train");
    c.train.lr = t.get<double>("lr", c.train.lr);
    c.train.epochs = t.get<int>("epochs", c.train.epochs);
    c.train.log_every = t.get<int>("log_every", c.train.log_every);
    c.train.batch_size = t.get<std::size_t>("batch_size", c.train.batch_size);
    c.train.track_metrics = t.get<bool>("track_metrics", c.train.track_metrics);
    t.finish();
  }
  if (s.has("eval")) c.train.eval = parse_eval(s.raw("eval"));
  if (s.has("seeds")) {
    const json& sj = s.raw("seeds");
    if (!sj.is_array() || sj.empty()) throw ConfigError("seeds: expected a non-empty array of integers");
    c.seeds.clear();
    for (const auto& v : sj) {
      if (!v.is_number_unsigned()) throw ConfigError("seeds: expected non-negative integers");
      c.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  c.output_dir = s.get<std::string>("output_dir", c.output_dir);
  s.finish();
  c.train.dataset = c.dataset.name;
  c.train.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  json j;
  try {
    j = read_json_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment_config(j);
}

inline Dataset load_experiment_dataset(const DatasetConfig& d) {
  Dataset out;
  out.name = d.name;
  if (d.kind == "sbm") {
    out.graphs.push_back(generate_sbm(d.sbm));
  } else if (d.kind == "graph_set") {
    out.graphs = generate_graph_dataset(d.graph_set);
  } else if (d.kind == "file") {
    out.graphs = load_dataset(d.path);
  } else {
    out.graphs.push_back(load_content_cites(d.content, d.cites).graph);
  }
  return out;
}

inline json encoder_to_json(const EncoderSpec& e) {
  json j = {{"kind", to_string(e.kind)},          {"layers", e.num_layers},
            {"hidden_dim", e.hidden_dim},         {"output_dim", e.output_dim},
            {"final_activation", e.final_activation}, {"readout", to_string(e.readout)}};
  if (e.contranorm) j["contranorm"] = {{"alpha", e.contranorm->alpha}, {"degree_mode", to_string(e.contranorm->degree_mode)}};
  return j;
}

inline json projection_to_json(const ProjectionSpec& p) {
  return {{"enabled", p.enabled}, {"hidden_dim", p.hidden_dim}, {"out_dim", p.out_dim}};
}

}  // namespace gcl
