#pragma once

#include <optional>
#include <string>

#include "gcllab/errors.hpp"

namespace gcl {

enum class EncoderKind { GCN, GIN, MLP };
enum class DegreeMode { PairMarginal, Identity };
enum class ReadoutMode { Sum, Mean };

inline const char* to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::GCN: return "gcn";
    case EncoderKind::GIN: return "gin";
    case EncoderKind::MLP: return "mlp";
  }
  return "?";
}

inline const char* to_string(DegreeMode m) { return m == DegreeMode::PairMarginal ? "pair_marginal" : "identity"; }
inline const char* to_string(ReadoutMode m) { return m == ReadoutMode::Sum ? "sum" : "mean"; }

struct ContraNormSpec {
  double alpha = 1.0;
  DegreeMode degree_mode = DegreeMode::PairMarginal;
};

struct EncoderSpec {
  EncoderKind kind = EncoderKind::GCN;
  int num_layers = 2;
  int hidden_dim = 64;
  int output_dim = 64;
  std::optional<ContraNormSpec> contranorm;
  // Apply relu after the last layer too. Off by default so H can go negative.
  bool final_activation = false;
  ReadoutMode readout = ReadoutMode::Sum;

  int layer_in(int l, int input_dim) const { return l == 0 ? input_dim : hidden_dim; }
  int layer_out(int l) const { return l == num_layers - 1 ? output_dim : hidden_dim; }

  void validate() const {
    if (num_layers < 1) throw ConfigError("encoder: num_layers must be >= 1");
    if (hidden_dim < 1 || output_dim < 1) throw ConfigError("encoder: dims must be >= 1");
    if (contranorm && !(contranorm->alpha >= 0.0)) throw ConfigError("encoder: contranorm alpha must be >= 0");
  }
};

struct ProjectionSpec {
  bool enabled = true;
  int hidden_dim = 64;
  int out_dim = 32;

  void validate() const {
    if (enabled && (hidden_dim < 1 || out_dim < 1)) throw ConfigError("projection: dims must be >= 1");
  }
};

}  // namespace gcl
