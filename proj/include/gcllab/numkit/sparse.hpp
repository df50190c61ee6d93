#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <tuple>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/numkit/matrix.hpp"

namespace gcl {

// Compressed sparse row matrix. Column indices are strictly increasing within
// each row, so (i, j) lookups are a binary search and duplicates cannot exist.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return col_indices.size(); }

  // Builds from (row, col, value) triplets. Duplicate coordinates are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<std::tuple<std::size_t, std::size_t, double>> triplets) {
    for (const auto& [r, c, v] : triplets) {
      if (r >= rows || c >= cols) throw ShapeError("sparse triplet out of range");
    }
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    SparseMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_offsets.assign(rows + 1, 0);
    for (std::size_t k = 0; k < triplets.size(); ++k) {
      const auto& [r, c, v] = triplets[k];
      if (!m.col_indices.empty() && k > 0 && std::get<0>(triplets[k - 1]) == r &&
          std::get<1>(triplets[k - 1]) == c) {
        m.values.back() += v;
        continue;
      }
      m.col_indices.push_back(c);
      m.values.push_back(v);
      ++m.row_offsets[r + 1];
    }
    for (std::size_t r = 0; r < rows; ++r) m.row_offsets[r + 1] += m.row_offsets[r];
    return m;
  }

  static SparseMatrix identity(std::size_t n) {
    SparseMatrix m;
    m.rows = m.cols = n;
    m.row_offsets.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) m.row_offsets[i] = i;
    m.col_indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) m.col_indices[i] = i;
    m.values.assign(n, 1.0);
    return m;
  }

  static SparseMatrix zeros(std::size_t rows, std::size_t cols) {
    SparseMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_offsets.assign(rows + 1, 0);
    return m;
  }

  double at(std::size_t i, std::size_t j) const {
    auto first = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
    auto last = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return values[static_cast<std::size_t>(it - col_indices.begin())];
  }

  Matrix to_dense() const {
    Matrix d = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col_indices[k])) += values[k];
    return d;
  }

  double sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }

  std::vector<double> row_sums() const {
    std::vector<double> s(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) s[i] += values[k];
    return s;
  }

  // Checks the CSR invariants; returns false instead of throwing.
  bool well_formed() const {
    if (row_offsets.size() != rows + 1 || row_offsets.front() != 0) return false;
    if (row_offsets.back() != col_indices.size() || values.size() != col_indices.size()) return false;
    for (std::size_t i = 0; i < rows; ++i) {
      if (row_offsets[i] > row_offsets[i + 1]) return false;
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
        if (col_indices[k] >= cols) return false;
        if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1]) return false;
      }
    }
    return true;
  }

  bool is_symmetric(double tol = 0.0) const {
    if (rows != cols) return false;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        if (std::abs(values[k] - at(col_indices[k], i)) > tol) return false;
    return true;
  }
};

// y = a * h, dense result.
inline Matrix sparse_times_dense(const SparseMatrix& a, const Matrix& h) {
  if (a.cols != static_cast<std::size_t>(h.rows()))
    throw ShapeError("spmm: sparse cols " + std::to_string(a.cols) + " != dense rows " +
                     std::to_string(h.rows()));
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(a.rows), h.cols());
  for (std::size_t i = 0; i < a.rows; ++i) {
    auto out_row = out.row(static_cast<Eigen::Index>(i));
    for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      out_row.noalias() += a.values[k] * h.row(static_cast<Eigen::Index>(a.col_indices[k]));
  }
  return out;
}

// y = aᵀ * g, dense result.
inline Matrix sparse_transpose_times_dense(const SparseMatrix& a, const Matrix& g) {
  if (a.rows != static_cast<std::size_t>(g.rows())) throw ShapeError("spmmᵀ: dimension mismatch");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(a.cols), g.cols());
  for (std::size_t i = 0; i < a.rows; ++i) {
    auto g_row = g.row(static_cast<Eigen::Index>(i));
    for (std::size_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      out.row(static_cast<Eigen::Index>(a.col_indices[k])).noalias() += a.values[k] * g_row;
  }
  return out;
}

}  // namespace gcl
