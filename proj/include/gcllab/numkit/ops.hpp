#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/numkit/matrix.hpp"
#include "gcllab/numkit/sparse.hpp"
#include "gcllab/numkit/tape.hpp"

// Differentiable operations over Tape-recorded values. Each op records a
// forward rule (re-evaluated on replay) and a backward rule that reads the
// node's output gradient and pushes contributions to its inputs.

namespace gcl {

inline constexpr double kNormEpsilon = 1e-12;

namespace detail {

inline Tape& same_tape(const Var& a) {
  if (!a.valid()) throw PreconditionError("op on empty Var");
  return *a.tape();
}

inline Tape& same_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid()) throw PreconditionError("op on empty Var");
  if (a.tape() != b.tape()) throw PreconditionError("operands recorded on different tapes");
  return *a.tape();
}

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " vs " + shape_str(b));
}

inline Matrix row_l2_normalize_value(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double norm = x.row(i).norm();
    y.row(i) = x.row(i) / std::max(norm, kNormEpsilon);
  }
  return y;
}

inline Matrix row_softmax_value(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (x.cols() == 0) continue;
    double m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

// Row-wise log Σ_j mask_ij·exp(x_ij); the empty-mask case is rejected.
using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline RowArray masked_entries(const Matrix& x, const Matrix* mask) {
  if (!mask) return x.array();
  return (mask->array() != 0.0).select(x.array(), -std::numeric_limits<double>::infinity());
}

inline Matrix masked_lse_value(const Matrix& x, const Matrix* mask) {
  RowArray xm = masked_entries(x, mask);
  Matrix out(x.rows(), 1);
  for (Eigen::Index i = 0; i < xm.rows(); ++i) {
    const double m = xm.row(i).maxCoeff();
    if (!std::isfinite(m)) throw ConfigError("logsumexp: row " + std::to_string(i) + " has no entries");
    out(i, 0) = m + std::log((xm.row(i) - m).exp().sum());
  }
  return out;
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions " + detail::shape_str(a.value()) + " x " +
                     detail::shape_str(b.value()));
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(
      OpKind::MatMul, {ia, ib},
      [ia, ib](const Tape& tp) -> Matrix { return tp.value(ia) * tp.value(ib); },
      [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.out_grad(self);
        if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
        if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
      });
}

// a · bᵀ without materializing the transpose on the tape.
inline Var matmul_nt(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: " + detail::shape_str(a.value()) + " x " + detail::shape_str(b.value()) + "ᵀ");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(
      OpKind::MatMulNT, {ia, ib},
      [ia, ib](const Tape& tp) -> Matrix { return tp.value(ia) * tp.value(ib).transpose(); },
      [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.out_grad(self);
        if (ia == ib) {
          tp.accumulate(ia, (g + g.transpose()) * tp.value(ia));
          return;
        }
        if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib));
        if (tp.requires_grad(ib)) tp.accumulate(ib, g.transpose() * tp.value(ia));
      });
}

inline Var transpose(const Var& a) {
  Tape& t = detail::same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      OpKind::Transpose, {ia}, [ia](const Tape& tp) -> Matrix { return tp.value(ia).transpose(); },
      [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.out_grad(self).transpose()); });
}

// Sparse (constant) times dense: row i of the result is Σ_j a_ij · h_j.
inline Var spmm(std::shared_ptr<const SparseMatrix> a, const Var& h) {
  Tape& t = detail::same_tape(h);
  if (!a) throw PreconditionError("spmm: null sparse matrix");
  if (a->cols != static_cast<std::size_t>(h.rows()))
    throw ShapeError("spmm: sparse " + std::to_string(a->rows) + "x" + std::to_string(a->cols) +
                     " times dense " + detail::shape_str(h.value()));
  const std::size_t ih = h.id();
  return t.record(
      OpKind::SpMM, {ih}, [a, ih](const Tape& tp) -> Matrix { return sparse_times_dense(*a, tp.value(ih)); },
      [a, ih](Tape& tp, std::size_t self) {
        tp.accumulate(ih, sparse_transpose_times_dense(*a, tp.out_grad(self)));
      });
}

inline Var spmm(const SparseMatrix& a, const Var& h) { return spmm(std::make_shared<const SparseMatrix>(a), h); }

inline Var relu(const Var& a) {
  Tape& t = detail::same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      OpKind::Relu, {ia}, [ia](const Tape& tp) -> Matrix { return tp.value(ia).cwiseMax(0.0); },
      [ia](Tape& tp, std::size_t self) {
        Matrix mask = (tp.value(ia).array() > 0.0).cast<double>().matrix();
        tp.accumulate(ia, tp.out_grad(self).cwiseProduct(mask));
      });
}

inline Var exp(const Var& a) {
  Tape& t = detail::same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      OpKind::Exp, {ia}, [ia](const Tape& tp) -> Matrix { return tp.value(ia).array().exp().matrix(); },
      [ia](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.out_grad(self).cwiseProduct(tp.value(self)));
      });
}

inline Var log(const Var& a) {
  Tape& t = detail::same_tape(a);
  if (a.value().size() > 0 && a.value().minCoeff() <= 0.0)
    throw DomainError("log: non-positive entry " + std::to_string(a.value().minCoeff()));
  const std::size_t ia = a.id();
  return t.record(
      OpKind::Log, {ia}, [ia](const Tape& tp) -> Matrix { return tp.value(ia).array().log().matrix(); },
      [ia](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.out_grad(self).cwiseQuotient(tp.value(ia)));
      });
}

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape("add", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(
      OpKind::Add, {ia, ib}, [ia, ib](const Tape& tp) -> Matrix { return tp.value(ia) + tp.value(ib); },
      [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.out_grad(self);
        tp.accumulate(ia, g);
        tp.accumulate(ib, g);
      });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape("sub", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(
      OpKind::Sub, {ia, ib}, [ia, ib](const Tape& tp) -> Matrix { return tp.value(ia) - tp.value(ib); },
      [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.out_grad(self);
        tp.accumulate(ia, g);
        tp.accumulate(ib, -g);
      });
}

inline Var scale(const Var& a, double s) {
  Tape& t = detail::same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      OpKind::Scale, {ia}, [ia, s](const Tape& tp) -> Matrix { return tp.value(ia) * s; },
      [ia, s](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.out_grad(self) * s); });
}

// a scaled by a 1x1 recorded value.
inline Var scale_by(const Var& a, const Var& s) {
  Tape& t = detail::same_tape(a, s);
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("scale_by: scale must be 1x1");
  const std::size_t ia = a.id(), is = s.id();
  return t.record(
      OpKind::ScaleBy, {ia, is}, [ia, is](const Tape& tp) -> Matrix { return tp.value(ia) * tp.value(is)(0, 0); },
      [ia, is](Tape& tp, std::size_t self) {
        const Matrix& g = tp.out_grad(self);
        if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(is)(0, 0));
        if (tp.requires_grad(is)) {
          Matrix gs(1, 1);
          gs(0, 0) = g.cwiseProduct(tp.value(ia)).sum();
          tp.accumulate(is, gs);
        }
      });
}

inline Var hadamard(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape("hadamard", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(
      OpKind::Hadamard, {ia, ib},
      [ia, ib](const Tape& tp) -> Matrix { return tp.value(ia).cwiseProduct(tp.value(ib)); },
      [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.out_grad(self);
        if (tp.requires_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
        if (tp.requires_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
      });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

enum class UnaryKind { Relu, Exp, Log, Negate };
enum class BinaryKind { Add, Sub, Hadamard };

inline Var elementwise(UnaryKind kind, const Var& a) {
  switch (kind) {
    case UnaryKind::Relu: return relu(a);
    case UnaryKind::Exp: return exp(a);
    case UnaryKind::Log: return log(a);
    case UnaryKind::Negate: return scale(a, -1.0);
  }
  throw PreconditionError("elementwise: unknown unary kind");
}

inline Var elementwise(BinaryKind kind, const Var& a, const Var& b) {
  switch (kind) {
    case BinaryKind::Add: return add(a, b);
    case BinaryKind::Sub: return sub(a, b);
    case BinaryKind::Hadamard: return hadamard(a, b);
  }
  throw PreconditionError("elementwise: unknown binary kind");
}

// Each row divided by max(‖row‖₂, 1e-12); all-zero rows stay zero.
inline Var row_l2_normalize(const Var& a) {
  Tape& t = detail::same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      OpKind::RowL2Normalize, {ia}, [ia](const Tape& tp) -> Matrix { return detail::row_l2_normalize_value(tp.value(ia)); },
      [ia](Tape& tp, std::size_t self) {
        const Matrix& x = tp.value(ia);
        const Matrix& y = tp.value(self);
        const Matrix& g = tp.out_grad(self);
        Matrix gx(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          double norm = x.row(i).norm();
          if (norm > kNormEpsilon) {
            double proj = y.row(i).dot(g.row(i));
            gx.row(i) = (g.row(i) - proj * y.row(i)) / norm;
          } else {
            gx.row(i) = g.row(i) / kNormEpsilon;
          }
        }
        tp.accumulate(ia, gx);
      });
}

inline Var row_softmax(const Var& a) {
  Tape& t = detail::same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      OpKind::RowSoftmax, {ia}, [ia](const Tape& tp) -> Matrix { return detail::row_softmax_value(tp.value(ia)); },
      [ia](Tape& tp, std::size_t self) {
        const Matrix& y = tp.value(self);
        const Matrix& g = tp.out_grad(self);
        Vector inner = g.cwiseProduct(y).rowwise().sum();
        Matrix gx = y.cwiseProduct(g - inner.replicate(1, g.cols()));
        tp.accumulate(ia, gx);
      });
}

inline Var sum(const Var& a) {
  Tape& t = detail::same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      OpKind::Sum, {ia},
      [ia](const Tape& tp) -> Matrix {
        Matrix s(1, 1);
        s(0, 0) = tp.value(ia).sum();
        return s;
      },
      [ia](Tape& tp, std::size_t self) {
        const Matrix& x = tp.value(ia);
        tp.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), tp.out_grad(self)(0, 0)));
      });
}

inline Var mean(const Var& a) {
  Tape& t = detail::same_tape(a);
  if (a.value().size() == 0) throw ShapeError("mean of empty tensor");
  const std::size_t ia = a.id();
  return t.record(
      OpKind::Mean, {ia},
      [ia](const Tape& tp) -> Matrix {
        Matrix s(1, 1);
        s(0, 0) = tp.value(ia).mean();
        return s;
      },
      [ia](Tape& tp, std::size_t self) {
        const Matrix& x = tp.value(ia);
        double g = tp.out_grad(self)(0, 0) / static_cast<double>(x.size());
        tp.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), g));
      });
}

// [a | b] along columns.
inline Var hconcat(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  if (a.rows() != b.rows()) throw ShapeError("hconcat: row counts differ");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(
      OpKind::HConcat, {ia, ib},
      [ia, ib](const Tape& tp) -> Matrix {
        const Matrix& x = tp.value(ia);
        const Matrix& y = tp.value(ib);
        Matrix out(x.rows(), x.cols() + y.cols());
        out << x, y;
        return out;
      },
      [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.out_grad(self);
        const Eigen::Index ca = tp.value(ia).cols();
        if (tp.requires_grad(ia)) tp.accumulate(ia, g.leftCols(ca));
        if (tp.requires_grad(ib)) tp.accumulate(ib, g.rightCols(g.cols() - ca));
      });
}

// Main diagonal of a square matrix as an n×1 column.
inline Var diagonal(const Var& a) {
  Tape& t = detail::same_tape(a);
  if (a.rows() != a.cols()) throw ShapeError("diagonal: matrix not square");
  const std::size_t ia = a.id();
  return t.record(
      OpKind::Diagonal, {ia}, [ia](const Tape& tp) -> Matrix { return tp.value(ia).diagonal(); },
      [ia](Tape& tp, std::size_t self) {
        const Matrix& g = tp.out_grad(self);
        const Eigen::Index n = g.rows();
        Matrix gx = Matrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) gx(i, i) = g(i, 0);
        tp.accumulate(ia, gx);
      });
}

// Row-wise log Σ_j exp(a_ij) over entries where mask_ij != 0 (all entries
// when no mask is given). Max-shifted; each row must keep one entry.
inline Var masked_row_logsumexp(const Var& a, std::optional<Matrix> mask = std::nullopt) {
  Tape& t = detail::same_tape(a);
  if (mask) detail::require_same_shape("masked_row_logsumexp", a.value(), *mask);
  auto shared = mask ? std::make_shared<const Matrix>(std::move(*mask)) : std::shared_ptr<const Matrix>{};
  const std::size_t ia = a.id();
  return t.record(
      OpKind::MaskedRowLogSumExp, {ia},
      [ia, shared](const Tape& tp) -> Matrix { return detail::masked_lse_value(tp.value(ia), shared.get()); },
      [ia, shared](Tape& tp, std::size_t self) {
        const Matrix& x = tp.value(ia);
        const Matrix& lse = tp.value(self);
        const Matrix& g = tp.out_grad(self);
        detail::RowArray p = detail::masked_entries(x, shared.get());
        for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) = (p.row(i) - lse(i, 0)).exp() * g(i, 0);
        tp.accumulate(ia, p.matrix());
      });
}

inline Var row_logsumexp(const Var& a) { return masked_row_logsumexp(a); }

// a_ij + c_j: adds the same row vector to every row.
inline Var add_row_broadcast(const Var& a, const Vector& c) {
  Tape& t = detail::same_tape(a);
  if (c.size() != a.cols()) throw ShapeError("add_row_broadcast: vector length != cols");
  const std::size_t ia = a.id();
  return t.record(
      OpKind::AddRowBroadcast, {ia},
      [ia, c](const Tape& tp) -> Matrix { return tp.value(ia).rowwise() + c.transpose(); },
      [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.out_grad(self)); });
}

// diag(w) · a with constant weights.
inline Var scale_rows(const Var& a, const Vector& w) {
  Tape& t = detail::same_tape(a);
  if (w.size() != a.rows()) throw ShapeError("scale_rows: weight length != rows");
  const std::size_t ia = a.id();
  return t.record(
      OpKind::ScaleRows, {ia}, [ia, w](const Tape& tp) -> Matrix { return w.asDiagonal() * tp.value(ia); },
      [ia, w](Tape& tp, std::size_t self) { tp.accumulate(ia, w.asDiagonal() * tp.out_grad(self)); });
}

// Row-wise inner products, n×1.
inline Var row_dot(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape("row_dot", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(
      OpKind::RowDot, {ia, ib},
      [ia, ib](const Tape& tp) -> Matrix { return tp.value(ia).cwiseProduct(tp.value(ib)).rowwise().sum(); },
      [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.out_grad(self);
        const Matrix& x = tp.value(ia);
        const Matrix& y = tp.value(ib);
        if (ia == ib) {
          tp.accumulate(ia, 2.0 * (g.replicate(1, x.cols()).cwiseProduct(x)));
          return;
        }
        if (tp.requires_grad(ia)) tp.accumulate(ia, g.replicate(1, y.cols()).cwiseProduct(y));
        if (tp.requires_grad(ib)) tp.accumulate(ib, g.replicate(1, x.cols()).cwiseProduct(x));
      });
}

inline Var gather_rows(const Var& a, std::vector<std::size_t> index) {
  Tape& t = detail::same_tape(a);
  for (std::size_t r : index)
    if (r >= static_cast<std::size_t>(a.rows())) throw ShapeError("gather_rows: index out of range");
  auto idx = std::make_shared<const std::vector<std::size_t>>(std::move(index));
  const std::size_t ia = a.id();
  return t.record(
      OpKind::GatherRows, {ia},
      [ia, idx](const Tape& tp) -> Matrix {
        const Matrix& x = tp.value(ia);
        Matrix out(static_cast<Eigen::Index>(idx->size()), x.cols());
        for (std::size_t k = 0; k < idx->size(); ++k)
          out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>((*idx)[k]));
        return out;
      },
      [ia, idx](Tape& tp, std::size_t self) {
        const Matrix& x = tp.value(ia);
        const Matrix& g = tp.out_grad(self);
        Matrix gx = Matrix::Zero(x.rows(), x.cols());
        for (std::size_t k = 0; k < idx->size(); ++k)
          gx.row(static_cast<Eigen::Index>((*idx)[k])) += g.row(static_cast<Eigen::Index>(k));
        tp.accumulate(ia, gx);
      });
}

// out_s = Σ_{i : segment[i] == s} a_i.
inline Var segment_sum(const Var& a, std::vector<std::size_t> segment, std::size_t num_segments) {
  Tape& t = detail::same_tape(a);
  if (segment.size() != static_cast<std::size_t>(a.rows())) throw ShapeError("segment_sum: assignment length != rows");
  for (std::size_t s : segment)
    if (s >= num_segments) throw ShapeError("segment_sum: segment id out of range");
  auto seg = std::make_shared<const std::vector<std::size_t>>(std::move(segment));
  const std::size_t ia = a.id();
  return t.record(
      OpKind::SegmentSum, {ia},
      [ia, seg, num_segments](const Tape& tp) -> Matrix {
        const Matrix& x = tp.value(ia);
        Matrix out = Matrix::Zero(static_cast<Eigen::Index>(num_segments), x.cols());
        for (std::size_t i = 0; i < seg->size(); ++i)
          out.row(static_cast<Eigen::Index>((*seg)[i])) += x.row(static_cast<Eigen::Index>(i));
        return out;
      },
      [ia, seg](Tape& tp, std::size_t self) {
        const Matrix& g = tp.out_grad(self);
        Matrix gx(static_cast<Eigen::Index>(seg->size()), g.cols());
        for (std::size_t i = 0; i < seg->size(); ++i)
          gx.row(static_cast<Eigen::Index>(i)) = g.row(static_cast<Eigen::Index>((*seg)[i]));
        tp.accumulate(ia, gx);
      });
}

inline Var squared_norm(const Var& a) { return sum(hadamard(a, a)); }

}  // namespace gcl
