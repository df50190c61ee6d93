#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "gcllab/errors.hpp"

namespace gcl {

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;      // sum of ranks of positive differences
  std::size_t n_used = 0;   // nonzero differences
  bool exact = false;
  bool degenerate = false;  // every difference was zero
};

// Average ranks (1-based) of |d|, ties sharing the mean of their positions.
inline std::vector<double> abs_ranks(const std::vector<double>& d) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> r(d.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

// Two-sided paired signed-rank test on a − b. Up to 20 nonzero differences
// the null distribution of W+ is counted exactly over all 2^n sign
// assignments (by dynamic programming on doubled ranks, so tied half-ranks
// stay integral); above that a tie-corrected normal approximation is used.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("wilcoxon: length mismatch");
  if (a.size() < 2) throw PreconditionError("wilcoxon: need at least 2 pairs");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  WilcoxonResult res;
  res.n_used = d.size();
  if (d.empty()) {
    res.degenerate = true;
    return res;
  }
  const auto ranks = abs_ranks(d);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0) res.w_plus += ranks[i];
  const std::size_t n = d.size();

  if (n <= 20) {
    res.exact = true;
    std::vector<int> r2(n);
    int total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r2[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total += r2[i];
    }
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (int r : r2)
      for (int s = total; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
    const int w2 = static_cast<int>(std::lround(2.0 * res.w_plus));
    double lower = 0.0, upper = 0.0;
    for (int s = 0; s <= total; ++s) {
      if (s <= w2) lower += count[static_cast<std::size_t>(s)];
      if (s >= w2) upper += count[static_cast<std::size_t>(s)];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    return res;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  const double z = (res.w_plus - mean) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  return res;
}

}  // namespace gcl
