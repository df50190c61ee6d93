#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "gcllab/errors.hpp"

namespace gcl {

struct Split {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
};

// Seeded permutation cut into train / test by rounded ratios; the remainder is
// validation.
inline Split random_split(std::size_t n, double train_ratio, double test_ratio, std::uint64_t seed) {
  auto bad = [](double r) { return !(r >= 0.0 && r <= 1.0); };
  if (bad(train_ratio) || bad(test_ratio)) throw ConfigError("random_split: ratios must lie in [0,1]");
  if (train_ratio + test_ratio > 1.0 + 1e-12) throw ConfigError("random_split: train_ratio + test_ratio > 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(n)));
  auto n_test = static_cast<std::size_t>(std::llround(test_ratio * static_cast<double>(n)));
  n_train = std::min(n_train, n);
  n_test = std::min(n_test, n - n_train);
  Split s;
  s.train_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                    perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
  s.val_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_test), perm.end());
  return s;
}

// k roughly equal folds of a seeded permutation.
inline std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) throw ConfigError("kfold: need 2 <= k <= n");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(perm[i]);
  return folds;
}

}  // namespace gcl
