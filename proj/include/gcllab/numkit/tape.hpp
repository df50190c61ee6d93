#pragma once

#include <cstddef>
#include <cstring>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gcllab/errors.hpp"
#include "gcllab/numkit/matrix.hpp"

namespace gcl {

enum class OpKind {
  Leaf,
  MatMul,
  MatMulNT,
  Transpose,
  SpMM,
  Relu,
  Exp,
  Log,
  Add,
  Sub,
  Scale,
  ScaleBy,
  Hadamard,
  RowL2Normalize,
  RowSoftmax,
  Sum,
  Mean,
  HConcat,
  Diagonal,
  MaskedRowLogSumExp,
  AddRowBroadcast,
  ScaleRows,
  RowDot,
  GatherRows,
  SegmentSum,
};

inline const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::MatMulNT: return "matmul_nt";
    case OpKind::Transpose: return "transpose";
    case OpKind::SpMM: return "spmm";
    case OpKind::Relu: return "relu";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Scale: return "scale";
    case OpKind::ScaleBy: return "scale_by";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::RowL2Normalize: return "row_l2_normalize";
    case OpKind::RowSoftmax: return "row_softmax";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::HConcat: return "hconcat";
    case OpKind::Diagonal: return "diagonal";
    case OpKind::MaskedRowLogSumExp: return "masked_row_logsumexp";
    case OpKind::AddRowBroadcast: return "add_row_broadcast";
    case OpKind::ScaleRows: return "scale_rows";
    case OpKind::RowDot: return "row_dot";
    case OpKind::GatherRows: return "gather_rows";
    case OpKind::SegmentSum: return "segment_sum";
  }
  return "?";
}

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// tape it points to is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Linear record of operations for reverse-mode differentiation. Every node
// keeps its forward rule so the whole record can be replayed, and a backward
// rule that reads the node's gradient and accumulates into its inputs.
class Tape {
 public:
  using ForwardFn = std::function<Matrix(const Tape&)>;
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  struct Node {
    OpKind kind = OpKind::Leaf;
    std::vector<std::size_t> inputs;
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    ForwardFn forward;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  Var leaf(Matrix value, bool requires_grad = false) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  Var constant(Matrix value) { return leaf(std::move(value), false); }

  Var parameter(Matrix value) { return leaf(std::move(value), true); }

  // Records a computed node. `forward` is evaluated immediately.
  Var record(OpKind kind, std::vector<std::size_t> inputs, ForwardFn forward, BackwardFn backward) {
    for (std::size_t in : inputs)
      if (in >= nodes_.size()) throw PreconditionError("tape: input id not yet recorded");
    Node n;
    n.kind = kind;
    n.value = forward(*this);
    for (std::size_t in : inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
    n.inputs = std::move(inputs);
    n.forward = std::move(forward);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  // Gradient of the last backward() target with respect to `v`. Zero-filled
  // when `v` was unreachable from the target.
  Matrix grad(const Var& v) const {
    const Node& n = nodes_.at(v.id());
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  const Matrix& out_grad(std::size_t id) const { return nodes_[id].grad; }

  void accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  void backward(const Var& loss) {
    if (loss.tape() != this) throw PreconditionError("backward: loss recorded on another tape");
    const Node& target = nodes_.at(loss.id());
    if (target.value.rows() != 1 || target.value.cols() != 1)
      throw ShapeError("backward: loss must be 1x1, got " + std::to_string(target.value.rows()) + "x" +
                       std::to_string(target.value.cols()));
    for (Node& n : nodes_) n.grad.resize(0, 0);
    if (!target.requires_grad) return;
    nodes_[loss.id()].grad = Matrix::Ones(1, 1);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.kind == OpKind::Leaf || !n.requires_grad || n.grad.size() == 0) continue;
      n.backward(*this, id);
    }
  }

  // Recomputes every non-leaf node from its recorded forward rule. Returns
  // true when all recomputed values are bitwise identical to the stored ones.
  bool replay() {
    bool identical = true;
    for (Node& n : nodes_) {
      if (n.kind == OpKind::Leaf) continue;
      Matrix again = n.forward(*this);
      if (again.rows() != n.value.rows() || again.cols() != n.value.cols() ||
          std::memcmp(again.data(), n.value.data(), sizeof(double) * static_cast<std::size_t>(again.size())) != 0)
        identical = false;
      n.value = std::move(again);
    }
    return identical;
  }

  // Overwrites a leaf value (shape must match); call replay() afterwards to
  // propagate.
  void set_leaf(const Var& v, const Matrix& value) {
    Node& n = nodes_.at(v.id());
    if (n.kind != OpKind::Leaf) throw PreconditionError("set_leaf: not a leaf");
    if (n.value.rows() != value.rows() || n.value.cols() != value.cols())
      throw ShapeError("set_leaf: shape mismatch");
    n.value = value;
  }

 private:
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const {
  if (!tape_) throw PreconditionError("Var: empty handle");
  return tape_->value(id_);
}

inline double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("Var::scalar on non-1x1 value");
  return v(0, 0);
}

inline bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

}  // namespace gcl
