#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/numkit/matrix.hpp"
#include "gcllab/numkit/ops.hpp"
#include "gcllab/numkit/optim.hpp"

namespace gcl {

enum class ProbeLoss { Logistic, Hinge };
enum class ProbeOptimizer { Adam, Plain };

inline const char* to_string(ProbeLoss l) { return l == ProbeLoss::Logistic ? "logistic" : "hinge"; }

struct ProbeConfig {
  ProbeLoss loss = ProbeLoss::Logistic;
  double lr = 0.05;
  int epochs = 300;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  ProbeOptimizer optimizer = ProbeOptimizer::Plain;
  bool normalize_rows = true;

  void validate() const {
    if (epochs < 1) throw ConfigError("probe: epochs must be >= 1");
    if (!(l2 >= 0.0)) throw ConfigError("probe: l2 must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("probe: lr must be > 0");
  }
};

struct ProbeResult {
  double accuracy = 0.0;
  double train_accuracy = 0.0;
  int unseen_test_classes = 0;   // classes present in test but not in train
  std::size_t unseen_test_samples = 0;
  std::vector<int> predictions;
};

namespace detail {

inline Matrix probe_design(const Matrix& h, bool normalize) {
  Matrix x(h.rows(), h.cols() + 1);
  x.leftCols(h.cols()) = normalize ? row_l2_normalize_value(h) : h;
  x.col(h.cols()).setOnes();
  return x;
}

inline std::vector<int> probe_predict(const Matrix& x, const Matrix& w, const std::vector<bool>& allowed) {
  Matrix s = x * w;
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    int best = -1;
    for (Eigen::Index k = 0; k < s.cols(); ++k)
      if (allowed[static_cast<std::size_t>(k)] && (best < 0 || s(i, k) > s(i, best))) best = static_cast<int>(k);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

inline double accuracy_of(const std::vector<int>& pred, const std::vector<int>& y) {
  if (y.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += pred[i] == y[i];
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

}  // namespace detail

// Trains a linear classifier (with intercept) on frozen representations and
// reports test accuracy. Inputs are copied; nothing upstream is touched.
inline ProbeResult linear_probe(const Matrix& h_train, const std::vector<int>& y_train, const Matrix& h_test,
                                const std::vector<int>& y_test, const ProbeConfig& cfg = {}) {
  cfg.validate();
  if (static_cast<std::size_t>(h_train.rows()) != y_train.size() ||
      static_cast<std::size_t>(h_test.rows()) != y_test.size())
    throw ShapeError("linear_probe: label count != row count");
  if (h_train.cols() != h_test.cols()) throw ShapeError("linear_probe: train/test dims differ");
  if (y_train.empty()) throw DataError("linear_probe: empty training set");
  int k = 0;
  for (int y : y_train) {
    if (y < 0) throw DataError("linear_probe: negative label");
    k = std::max(k, y + 1);
  }
  for (int y : y_test) {
    if (y < 0) throw DataError("linear_probe: negative label");
    k = std::max(k, y + 1);
  }
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int y : y_train) seen[static_cast<std::size_t>(y)] = true;

  ProbeResult res;
  std::set<int> unseen;
  for (int y : y_test)
    if (!seen[static_cast<std::size_t>(y)]) {
      unseen.insert(y);
      ++res.unseen_test_samples;
    }
  res.unseen_test_classes = static_cast<int>(unseen.size());

  const Matrix x = detail::probe_design(h_train, cfg.normalize_rows);
  const Eigen::Index n = x.rows(), d = x.cols();
  Matrix y1 = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) y1(i, y_train[static_cast<std::size_t>(i)]) = 1.0;
  Matrix w = Matrix::Zero(d, k);
  AdamState adam(AdamConfig{.lr = cfg.lr});
  Matrix reg_mask = Matrix::Ones(d, k);
  reg_mask.row(d - 1).setZero();  // intercept is not penalized

  for (int e = 0; e < cfg.epochs; ++e) {
    Matrix s = x * w;
    Matrix coef(n, k);
    if (cfg.loss == ProbeLoss::Logistic) {
      coef = detail::row_softmax_value(s) - y1;
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < k; ++c) {
          double t = y1(i, c) > 0 ? 1.0 : -1.0;
          coef(i, c) = t * s(i, c) < 1.0 ? -t : 0.0;
        }
    }
    Matrix g = x.transpose() * coef / static_cast<double>(n) + cfg.l2 * w.cwiseProduct(reg_mask);
    if (cfg.optimizer == ProbeOptimizer::Adam) {
      adam_step(adam, std::span<Matrix>(&w, 1), std::span<const Matrix>(&g, 1));
    } else {
      w -= cfg.lr * g;
    }
  }
  res.train_accuracy = detail::accuracy_of(detail::probe_predict(x, w, seen), y_train);
  res.predictions = detail::probe_predict(detail::probe_design(h_test, cfg.normalize_rows), w, seen);
  res.accuracy = detail::accuracy_of(res.predictions, y_test);
  return res;
}

inline Matrix select_rows(const Matrix& h, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), h.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = h.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline std::vector<int> select_labels(const std::vector<int>& y, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(y[i]);
  return out;
}

inline const std::vector<double>& default_l2_grid() {
  static const std::vector<double> grid = {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
  return grid;
}

// Shuffled k-fold partition; fold f holds positions f, f+k, ... of the
// permutation.
inline std::vector<std::vector<std::size_t>> probe_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > n) throw ConfigError("probe_folds: need 2 <= k <= n");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) folds[i % static_cast<std::size_t>(k)].push_back(perm[i]);
  return folds;
}

struct CvResult {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<double> fold_accuracy;
  std::vector<double> chosen_l2;
};

// Outer k-fold cross-validated accuracy; the L2 strength for each outer fold
// is picked by an inner k-fold search on that fold's training part.
inline CvResult cross_validated_probe(const Matrix& h, const std::vector<int>& y, ProbeConfig cfg, int outer_folds = 10,
                                      int inner_folds = 5, const std::vector<double>& l2_grid = default_l2_grid()) {
  if (static_cast<std::size_t>(h.rows()) != y.size()) throw ShapeError("cross_validated_probe: label count");
  if (l2_grid.empty()) throw ConfigError("cross_validated_probe: empty l2 grid");
  auto outer = probe_folds(y.size(), outer_folds, cfg.seed);
  CvResult res;
  for (std::size_t f = 0; f < outer.size(); ++f) {
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < outer.size(); ++g)
      if (g != f) train.insert(train.end(), outer[g].begin(), outer[g].end());
    std::sort(train.begin(), train.end());
    double best_l2 = l2_grid.front(), best_acc = -1.0;
    if (l2_grid.size() > 1) {
      auto inner = probe_folds(train.size(), std::min<int>(inner_folds, static_cast<int>(train.size())), cfg.seed + 1 + f);
      for (double l2 : l2_grid) {
        double acc = 0.0;
        for (std::size_t i = 0; i < inner.size(); ++i) {
          std::vector<std::size_t> itr, ite;
          for (std::size_t j = 0; j < inner.size(); ++j)
            for (std::size_t pos : inner[j]) (j == i ? ite : itr).push_back(train[pos]);
          ProbeConfig c = cfg;
          c.l2 = l2;
          acc += linear_probe(select_rows(h, itr), select_labels(y, itr), select_rows(h, ite), select_labels(y, ite), c)
                     .accuracy;
        }
        if (acc > best_acc) {
          best_acc = acc;
          best_l2 = l2;
        }
      }
    }
    ProbeConfig c = cfg;
    c.l2 = best_l2;
    res.fold_accuracy.push_back(
        linear_probe(select_rows(h, train), select_labels(y, train), select_rows(h, outer[f]), select_labels(y, outer[f]), c)
            .accuracy);
    res.chosen_l2.push_back(best_l2);
  }
  const double m = std::accumulate(res.fold_accuracy.begin(), res.fold_accuracy.end(), 0.0) /
                   static_cast<double>(res.fold_accuracy.size());
  double var = 0.0;
  for (double a : res.fold_accuracy) var += (a - m) * (a - m);
  res.mean_accuracy = m;
  res.std_accuracy = res.fold_accuracy.size() > 1 ? std::sqrt(var / static_cast<double>(res.fold_accuracy.size() - 1)) : 0.0;
  return res;
}

}  // namespace gcl
