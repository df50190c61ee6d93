#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/numkit/matrix.hpp"

namespace gcl {

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // column k pairs with values(k)
  int sweeps = 0;
};

inline double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Cyclic Jacobi rotations on a symmetric matrix. Stops when the off-diagonal
// Frobenius norm drops below `tol` (or stops shrinking at machine precision).
// With compute_vectors false the returned `vectors` is left empty.
inline EigenDecomposition symmetric_eig(const Matrix& m, double tol = 1e-10, int max_sweeps = 100,
                                        bool compute_vectors = true) {
  if (m.rows() != m.cols()) throw PreconditionError("symmetric_eig: matrix not square");
  const Eigen::Index n = m.rows();
  if (n > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() >= 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw PreconditionError("symmetric_eig: matrix is not symmetric");

  Matrix a = 0.5 * (m + m.transpose());
  Matrix v = Matrix::Identity(n, n);
  // Rounding leaves an off-diagonal floor near eps·‖m‖; don't chase below it.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * a.norm();
  const double target = std::max(tol, floor);
  EigenDecomposition out;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_diagonal_norm(a) < target) break;
    ++out.sweeps;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        if (compute_vectors)
          for (Eigen::Index k = 0; k < n; ++k) {
            const double vkp = v(k, p);
            const double vkq = v(k, q);
            v(k, p) = c * vkp - s * vkq;
            v(k, q) = s * vkp + c * vkq;
          }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  out.values.resize(n);
  if (compute_vectors) out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    if (compute_vectors) out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

}  // namespace gcl
