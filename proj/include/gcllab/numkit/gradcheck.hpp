#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/numkit/matrix.hpp"
#include "gcllab/numkit/tape.hpp"

namespace gcl {

// Builds a scalar loss on `tape` from parameter handles (one per matrix, in
// the order given to grad_check).
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  double autodiff = 0.0;
  double finite_diff = 0.0;
};

inline double evaluate_loss(const LossBuilder& f, const std::vector<Matrix>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Matrix& p : params) vars.push_back(tape.leaf(p, false));
  double v = f(tape, vars).scalar();
  if (!std::isfinite(v)) throw EvaluationError("grad_check: loss is not finite");
  return v;
}

inline std::vector<Matrix> autodiff_gradients(const LossBuilder& f, const std::vector<Matrix>& params) {
  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& p : params) vars.push_back(tape.parameter(p));
  Var loss = f(tape, vars);
  if (!std::isfinite(loss.scalar())) throw EvaluationError("grad_check: loss is not finite");
  tape.backward(loss);
  std::vector<Matrix> grads;
  for (const Var& v : vars) grads.push_back(tape.grad(v));
  return grads;
}

// Compares autodiff gradients with central differences entry by entry and
// reports max |g_ad − g_fd| / max(|g_ad|, |g_fd|, 1e-8).
inline GradCheckResult grad_check_detailed(const LossBuilder& f, std::vector<Matrix> params, double eps = 1e-5) {
  if (!(eps > 0.0)) throw PreconditionError("grad_check: eps must be positive");
  const std::vector<Matrix> grads = autodiff_gradients(f, params);
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < params[k].cols(); ++j) {
        const double orig = params[k](i, j);
        params[k](i, j) = orig + eps;
        const double up = evaluate_loss(f, params);
        params[k](i, j) = orig - eps;
        const double down = evaluate_loss(f, params);
        params[k](i, j) = orig;
        const double fd = (up - down) / (2.0 * eps);
        const double ad = grads[k](i, j);
        const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-8});
        if (rel > result.max_rel_error) {
          result = {rel, k, i, j, ad, fd};
        }
      }
    }
  }
  return result;
}

inline double grad_check(const LossBuilder& f, std::vector<Matrix> params, double eps = 1e-5) {
  return grad_check_detailed(f, std::move(params), eps).max_rel_error;
}

}  // namespace gcl
