#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gcllab/errors.hpp"
#include "gcllab/models/spec.hpp"
#include "gcllab/numkit/matrix.hpp"
#include "gcllab/numkit/tape.hpp"

namespace gcl {

// Ordered, named parameter tensors. Encoder entries are prefixed "enc.",
// projection-head entries "proj.".
struct ModelParams {
  std::vector<std::string> names;
  std::vector<Matrix> values;

  std::size_t size() const noexcept { return names.size(); }

  void add(std::string name, Matrix value) {
    if (index_of(name)) throw ConfigError("params: duplicate name " + name);
    names.push_back(std::move(name));
    values.push_back(std::move(value));
  }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return std::nullopt;
  }

  const Matrix& at(const std::string& name) const {
    auto i = index_of(name);
    if (!i) throw ConfigError("params: no parameter named " + name);
    return values[*i];
  }
  Matrix& at(const std::string& name) { return const_cast<Matrix&>(std::as_const(*this).at(name)); }

  bool operator==(const ModelParams& o) const { return names == o.names && values == o.values; }
};

// Parameters placed on a tape, addressable by name.
struct BoundParams {
  const ModelParams* source = nullptr;
  std::vector<Var> vars;

  Var get(const std::string& name) const {
    auto i = source->index_of(name);
    if (!i) throw ConfigError("params: no parameter named " + name);
    return vars[*i];
  }
  bool has(const std::string& name) const { return source->index_of(name).has_value(); }
};

inline BoundParams bind(Tape& tape, const ModelParams& p, bool requires_grad = true) {
  BoundParams b;
  b.source = &p;
  for (const Matrix& m : p.values) b.vars.push_back(tape.leaf(m, requires_grad));
  return b;
}

inline double glorot_bound(int fan_in, int fan_out) { return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)); }

inline Matrix glorot_uniform(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double b = glorot_bound(fan_in, fan_out);
  std::uniform_real_distribution<double> u(-b, b);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  return w;
}

inline std::string gin_name(int layer, const char* what) {
  return "enc.gin" + std::to_string(layer) + "." + what;
}

// Glorot-uniform weights, no biases; GIN ε starts at 0.
inline ModelParams init_params(const EncoderSpec& enc, const ProjectionSpec& proj, int input_dim, std::uint64_t seed) {
  enc.validate();
  proj.validate();
  if (input_dim < 1) throw ConfigError("init_params: input_dim must be >= 1");
  std::mt19937_64 rng(seed);
  ModelParams p;
  for (int l = 0; l < enc.num_layers; ++l) {
    const int in = enc.layer_in(l, input_dim), out = enc.layer_out(l);
    if (enc.kind == EncoderKind::GIN) {
      p.add(gin_name(l, "w1"), glorot_uniform(in, out, rng));
      p.add(gin_name(l, "w2"), glorot_uniform(out, out, rng));
      p.add(gin_name(l, "eps"), Matrix::Zero(1, 1));
    } else {
      p.add("enc.w" + std::to_string(l), glorot_uniform(in, out, rng));
    }
  }
  if (proj.enabled) {
    p.add("proj.w1", glorot_uniform(enc.output_dim, proj.hidden_dim, rng));
    p.add("proj.w2", glorot_uniform(proj.hidden_dim, proj.out_dim, rng));
  }
  return p;
}

inline nlohmann::json params_to_json(const ModelParams& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Matrix& m = p.values[i];
    std::vector<double> flat(m.data(), m.data() + m.size());
    arr.push_back({{"name", p.names[i]}, {"shape", {m.rows(), m.cols()}}, {"values", flat}});
  }
  return {{"params", arr}};
}

inline ModelParams params_from_json(const nlohmann::json& j) {
  try {
    ModelParams p;
    for (const auto& e : j.at("params")) {
      auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
      auto flat = e.at("values").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(flat.size()))
        throw DataError("checkpoint: shape/value count mismatch for " + e.at("name").get<std::string>());
      Matrix m = Eigen::Map<const Matrix>(flat.data(), shape[0], shape[1]);
      if (!all_finite(m)) throw DataError("checkpoint: non-finite values");
      p.add(e.at("name").get<std::string>(), std::move(m));
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const ModelParams& p, const nlohmann::json& meta = {}) {
  nlohmann::json j = params_to_json(p);
  if (!meta.is_null()) j["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump() << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline ModelParams load_checkpoint(const std::string& path) { return params_from_json(read_json_file(path)); }

}  // namespace gcl
