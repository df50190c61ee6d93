#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/numkit/matrix.hpp"

namespace gcl {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moments are created lazily on the first step so
// they always match the parameter shapes they were first applied to.
struct AdamState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step_count = 0;

  explicit AdamState(AdamConfig cfg = {}) : config(cfg) {}
};

inline void adam_step(AdamState& state, std::span<Matrix> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.first_moment.empty()) {
    for (const Matrix& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: parameter set changed");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].rows() != params[k].rows() || grads[k].cols() != params[k].cols() ||
        state.first_moment[k].rows() != params[k].rows() || state.first_moment[k].cols() != params[k].cols())
      throw ShapeError("adam_step: gradient shape does not match parameter " + std::to_string(k));
  }
  ++state.step_count;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& m = state.first_moment[k];
    Matrix& v = state.second_moment[k];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[k];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[k].cwiseProduct(grads[k]);
    auto m_hat = m.array() / bc1;
    auto v_hat = v.array() / bc2;
    params[k].array() -= c.lr * m_hat / (v_hat.sqrt() + c.epsilon);
  }
}

}  // namespace gcl
