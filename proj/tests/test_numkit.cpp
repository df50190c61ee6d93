#include <catch_amalgamated.hpp>

#include <Eigen/SVD>
#include <cmath>
#include <random>

#include "gcllab/numkit.hpp"

using namespace gcl;
using Catch::Approx;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

SparseMatrix random_sparse(std::size_t n, std::size_t m, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::tuple<std::size_t, std::size_t, double>> t;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (u(rng) < density) t.emplace_back(i, j, u(rng) - 0.5);
  return SparseMatrix::from_triplets(n, m, t);
}

}  // namespace

TEST_CASE("matmul") {
  Tape tape;
  SECTION("identity") {
    auto c = matmul(tape.constant(Matrix::Identity(2, 2)), tape.constant(from_rows({{1, 2}, {3, 4}})));
    CHECK(max_abs_diff(c.value(), from_rows({{1, 2}, {3, 4}})) == 0.0);
  }
  SECTION("selector row") {
    auto c = matmul(tape.constant(from_rows({{1, 0}})), tape.constant(from_rows({{2}, {5}})));
    CHECK(c.scalar() == 2.0);
  }
  SECTION("naive oracle") {
    std::mt19937_64 rng(1);
    Matrix a = random_matrix(3, 4, rng), b = random_matrix(4, 2, rng);
    auto c = matmul(tape.constant(a), tape.constant(b));
    CHECK(max_abs_diff(c.value(), naive_product(a, b)) < 1e-12);
  }
  SECTION("shape error") {
    CHECK_THROWS_AS(matmul(tape.constant(Matrix::Zero(2, 3)), tape.constant(Matrix::Zero(2, 3))), ShapeError);
  }
}

TEST_CASE("spmm") {
  Tape tape;
  std::mt19937_64 rng(2);
  Matrix h = random_matrix(4, 3, rng);
  SECTION("zero sparse") {
    auto y = spmm(SparseMatrix::zeros(4, 4), tape.constant(h));
    CHECK(y.value().isZero(0.0));
  }
  SECTION("identity") {
    auto y = spmm(SparseMatrix::identity(4), tape.constant(h));
    CHECK(max_abs_diff(y.value(), h) == 0.0);
  }
  SECTION("2-node path") {
    auto a = SparseMatrix::from_triplets(2, 2, {{0, 0, .5}, {0, 1, .5}, {1, 0, .5}, {1, 1, .5}});
    auto y = spmm(a, tape.constant(Matrix::Identity(2, 2)));
    CHECK(max_abs_diff(y.value(), Matrix::Constant(2, 2, 0.5)) == 0.0);
  }
  SECTION("dense oracle and backward") {
    auto a = random_sparse(4, 4, 0.5, rng);
    CHECK(max_abs_diff(sparse_times_dense(a, h), naive_product(a.to_dense(), h)) < 1e-12);
    Matrix g = random_matrix(4, 3, rng);
    CHECK(max_abs_diff(sparse_transpose_times_dense(a, g), naive_product(a.to_dense().transpose(), g)) < 1e-12);
  }
  SECTION("shape error") { CHECK_THROWS_AS(spmm(SparseMatrix::identity(3), tape.constant(h)), ShapeError); }
}

TEST_CASE("sparse invariants") {
  auto m = SparseMatrix::from_triplets(3, 3, {{2, 1, 1.0}, {0, 2, 2.0}, {0, 2, 3.0}, {1, 0, 4.0}});
  CHECK(m.well_formed());
  CHECK(m.nnz() == 3);
  CHECK(m.at(0, 2) == 5.0);
  CHECK(m.at(1, 1) == 0.0);
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), ShapeError);
}

TEST_CASE("elementwise") {
  Tape tape;
  CHECK(max_abs_diff(relu(tape.constant(from_rows({{-1, 2}}))).value(), from_rows({{0, 2}})) == 0.0);
  CHECK(exp(tape.constant(from_rows({{0}}))).scalar() == 1.0);
  CHECK(max_abs_diff(scale(tape.constant(from_rows({{1, 2}})), 0.5).value(), from_rows({{0.5, 1}})) == 0.0);
  CHECK_THROWS_AS(log(tape.constant(from_rows({{1, 0}}))), DomainError);
  CHECK_THROWS_AS(log(tape.constant(from_rows({{-2}}))), DomainError);
  CHECK_THROWS_AS(add(tape.constant(Matrix::Zero(1, 2)), tape.constant(Matrix::Zero(2, 1))), ShapeError);
  CHECK(elementwise(UnaryKind::Negate, tape.constant(from_rows({{3}}))).scalar() == -3.0);
  CHECK(elementwise(BinaryKind::Hadamard, tape.constant(from_rows({{3, 2}})), tape.constant(from_rows({{2, 5}})))
            .value() == from_rows({{6, 10}}));
}

TEST_CASE("relu gradient is the positive indicator") {
  Tape tape;
  auto x = tape.parameter(from_rows({{-1, 2, 0.5, -3}}));
  tape.backward(sum(relu(x)));
  CHECK(tape.grad(x) == from_rows({{0, 1, 1, 0}}));
}

TEST_CASE("row_l2_normalize") {
  Tape tape;
  CHECK(max_abs_diff(row_l2_normalize(tape.constant(from_rows({{3, 4}}))).value(), from_rows({{0.6, 0.8}})) < 1e-15);
  CHECK(row_l2_normalize(tape.constant(from_rows({{0, 0}}))).value().isZero(0.0));
  std::mt19937_64 rng(3);
  auto y = row_l2_normalize(tape.constant(random_matrix(5, 7, rng)));
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(y.value().row(i).norm() - 1.0) < 1e-12);
}

TEST_CASE("row_softmax") {
  Tape tape;
  CHECK(max_abs_diff(row_softmax(tape.constant(from_rows({{0, 0}}))).value(), from_rows({{0.5, 0.5}})) < 1e-15);
  CHECK(max_abs_diff(row_softmax(tape.constant(from_rows({{1000, 0}}))).value(), from_rows({{1, 0}})) < 1e-12);
  std::mt19937_64 rng(4);
  Matrix x = random_matrix(3, 3, rng);
  Matrix oracle = x.array().exp();
  for (Eigen::Index i = 0; i < 3; ++i) oracle.row(i) /= oracle.row(i).sum();
  CHECK(max_abs_diff(row_softmax(tape.constant(x)).value(), oracle) < 1e-14);

  SECTION("rows sum to one and shift invariance") {
    for (int trial = 0; trial < 20; ++trial) {
      Matrix h = random_matrix(6, 5, rng, 10.0);
      Matrix shifted = h;
      Vector c = random_matrix(6, 1, rng, 50.0);
      for (Eigen::Index i = 0; i < 6; ++i) shifted.row(i).array() += c(i);
      Matrix s1 = row_softmax(tape.constant(h)).value();
      Matrix s2 = row_softmax(tape.constant(shifted)).value();
      for (Eigen::Index i = 0; i < 6; ++i) CHECK(std::abs(s1.row(i).sum() - 1.0) < 1e-12);
      CHECK(max_abs_diff(s1, s2) < 1e-12);
    }
  }
}

TEST_CASE("backward") {
  SECTION("sum gives ones") {
    Tape tape;
    auto w = tape.parameter(Matrix::Random(2, 2));
    tape.backward(sum(w));
    CHECK(tape.grad(w) == Matrix::Ones(2, 2));
  }
  SECTION("half squared norm gives W") {
    Tape tape;
    Matrix w0 = from_rows({{1, -2}, {0.5, 3}});
    auto w = tape.parameter(w0);
    tape.backward(scale(squared_norm(w), 0.5));
    CHECK(max_abs_diff(tape.grad(w), w0) < 1e-15);
  }
  SECTION("unreachable parameter gets zero") {
    Tape tape;
    auto w = tape.parameter(Matrix::Ones(2, 2));
    auto v = tape.parameter(Matrix::Ones(3, 1));
    tape.backward(sum(w));
    CHECK(tape.grad(v) == Matrix::Zero(3, 1));
  }
  SECTION("non-scalar loss") {
    Tape tape;
    auto w = tape.parameter(Matrix::Ones(2, 2));
    CHECK_THROWS_AS(tape.backward(w), ShapeError);
  }
}

TEST_CASE("tape replay is bit-identical and acyclic") {
  std::mt19937_64 rng(5);
  Tape tape;
  auto x = tape.parameter(random_matrix(4, 3, rng));
  auto w = tape.parameter(random_matrix(3, 3, rng));
  auto y = row_softmax(matmul_nt(relu(matmul(x, w)), x));
  auto loss = mean(masked_row_logsumexp(y));
  CHECK(tape.replay());
  for (std::size_t id = 0; id < tape.size(); ++id)
    for (std::size_t in : tape.node(id).inputs) CHECK(in < id);
  double before = loss.scalar();
  tape.set_leaf(x, x.value() * 2.0);
  CHECK_FALSE(tape.replay());
  CHECK(loss.scalar() != before);
}

TEST_CASE("grad_check") {
  SECTION("quadratic") {
    LossBuilder f = [](Tape&, const std::vector<Var>& p) { return scale(squared_norm(p[0]), 0.5); };
    CHECK(grad_check(f, {from_rows({{1, -2, 0.3}, {4, 0.7, -1}})}) < 1e-7);
  }
  SECTION("constant") {
    LossBuilder f = [](Tape& t, const std::vector<Var>&) { return t.constant(Matrix::Constant(1, 1, 3.0)); };
    CHECK(grad_check(f, {Matrix::Ones(2, 2)}) == 0.0);
  }
  SECTION("non-finite") {
    LossBuilder f = [](Tape&, const std::vector<Var>& p) { return sum(scale(exp(p[0]), 1.0)); };
    CHECK_THROWS_AS(grad_check(f, {Matrix::Constant(1, 1, 1000.0)}), EvaluationError);
  }
}

namespace {

// Random composition of registered ops up to a given depth.
Var random_dag(const std::vector<Var>& p, std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, 13);
  Var x = p[0];  // 4x3
  Var w = p[1];  // 3x3
  for (int d = 0; d < depth; ++d) {
    switch (pick(rng)) {
      case 0: x = matmul(x, w); break;
      case 1: x = row_l2_normalize(x); break;
      case 2: x = row_softmax(x); break;
      case 3: x = hadamard(x, x) * 0.5; break;
      case 4: x = add(x, matmul(x, w)); break;
      case 5: x = sub(x, scale(x, 0.3)); break;
      case 6: x = transpose(transpose(x)); break;
      case 7: x = exp(scale(row_l2_normalize(x), 0.5)); break;
      case 8: x = log(add(exp(x), exp(x))); break;
      case 9: x = matmul(matmul_nt(x, x), x) * 0.2; break;
      case 10: x = scale_rows(x, Vector::LinSpaced(x.rows(), 0.5, 1.5)); break;
      case 11: x = add_row_broadcast(x, Vector::LinSpaced(x.cols(), -0.1, 0.2)); break;
      case 12: x = scale_by(x, mean(hadamard(x, x))); break;
      default: x = relu(x) + scale(x, 0.1); break;
    }
  }
  Var s = matmul_nt(x, x);
  Var pieces = hconcat(s, matmul_nt(x, p[0]));
  Matrix mask = Matrix::Ones(pieces.rows(), pieces.cols());
  mask(0, 0) = 0.0;
  Var lse = masked_row_logsumexp(pieces, mask);
  Var gathered = gather_rows(x, {3, 0, 0, 2});
  Var seg = segment_sum(gathered, {0, 1, 1, 0}, 2);
  return add(mean(sub(lse, diagonal(s))), add(sum(row_dot(x, x)) * 0.1, mean(seg)));
}

}  // namespace

TEST_CASE("autodiff on random DAGs of depth <= 6") {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    int depth = 1 + trial % 6;
    std::uint64_t dag_seed = rng();
    LossBuilder f = [depth, dag_seed](Tape&, const std::vector<Var>& p) {
      std::mt19937_64 local(dag_seed);
      return random_dag(p, local, depth);
    };
    std::vector<Matrix> params{random_matrix(4, 3, rng, 0.7), random_matrix(3, 3, rng, 0.7)};
    double err = grad_check(f, params);
    worst = std::max(worst, err);
    INFO("trial " << trial << " depth " << depth);
    CHECK(err < 1e-4);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("determinism of forward values and gradients") {
  auto run = [] {
    std::mt19937_64 rng(7);
    Tape t;
    auto x = t.parameter(random_matrix(5, 4, rng));
    auto loss = mean(row_logsumexp(matmul_nt(row_l2_normalize(x), x)));
    t.backward(loss);
    return std::make_pair(loss.scalar(), t.grad(x));
  };
  auto [a, ga] = run();
  auto [b, gb] = run();
  CHECK(a == b);
  CHECK(ga == gb);
}

TEST_CASE("adam") {
  SECTION("first step is lr*sign(g)") {
    Matrix p = from_rows({{1, 2, 3}});
    Matrix g = from_rows({{0.5, -2.0, 1e-3}});
    AdamState st;
    st.config.lr = 0.01;
    Matrix before = p;
    adam_step(st, std::span<Matrix>(&p, 1), std::span<const Matrix>(&g, 1));
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs((p(0, j) - before(0, j)) + 0.01 * (g(0, j) > 0 ? 1 : -1)) < 1e-6);
    CHECK(st.step_count == 1);
  }
  SECTION("zero gradient leaves parameters unchanged") {
    Matrix p = from_rows({{1, 2}});
    Matrix g = Matrix::Zero(1, 2);
    AdamState st;
    adam_step(st, std::span<Matrix>(&p, 1), std::span<const Matrix>(&g, 1));
    CHECK(p == from_rows({{1, 2}}));
  }
  SECTION("two steps match hand unroll") {
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.3;
    Matrix p = from_rows({{1.0}});
    Matrix gm = from_rows({{g}});
    AdamState st;
    st.config.lr = lr;
    adam_step(st, std::span<Matrix>(&p, 1), std::span<const Matrix>(&gm, 1));
    adam_step(st, std::span<Matrix>(&p, 1), std::span<const Matrix>(&gm, 1));
    double x = 1.0, m = 0, v = 0;
    for (int t = 1; t <= 2; ++t) {
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
      x -= lr * mh / (std::sqrt(vh) + eps);
    }
    CHECK(std::abs(p(0, 0) - x) < 1e-15);
    CHECK(st.step_count == 2);
    CHECK(st.first_moment[0].rows() == 1);
  }
  SECTION("misaligned grads") {
    Matrix p = Matrix::Zero(2, 2);
    Matrix g = Matrix::Zero(2, 3);
    AdamState st;
    CHECK_THROWS_AS(adam_step(st, std::span<Matrix>(&p, 1), std::span<const Matrix>(&g, 1)), ShapeError);
  }
}

TEST_CASE("symmetric_eig") {
  SECTION("identity") {
    auto e = symmetric_eig(Matrix::Identity(3, 3));
    CHECK(max_abs_diff(e.values, Vector::Ones(3)) < 1e-15);
  }
  SECTION("diag(1,4) sorted with axis vectors") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1;
    m(1, 1) = 4;
    auto e = symmetric_eig(m);
    CHECK(e.values(0) == Approx(4.0));
    CHECK(e.values(1) == Approx(1.0));
    CHECK(std::abs(std::abs(e.vectors(1, 0)) - 1.0) < 1e-12);
    CHECK(std::abs(std::abs(e.vectors(0, 1)) - 1.0) < 1e-12);
  }
  SECTION("asymmetric input") {
    Matrix m = from_rows({{1, 2}, {0, 1}});
    CHECK_THROWS_AS(symmetric_eig(m), PreconditionError);
  }
  SECTION("reconstruction, trace, orthonormality") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
      Eigen::Index d = 2 + trial % 9;
      Matrix a = random_matrix(d, d, rng);
      Matrix m = a + a.transpose();
      auto e = symmetric_eig(m);
      Matrix rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
      CHECK(max_abs_diff(rec, m) < 1e-8);
      CHECK(std::abs(e.values.sum() - m.trace()) < 1e-8);
      CHECK(max_abs_diff(e.vectors.transpose() * e.vectors, Matrix::Identity(d, d)) < 1e-8);
      for (Eigen::Index i = 1; i < d; ++i) CHECK(e.values(i - 1) >= e.values(i));
    }
  }
  SECTION("Gram eigenvalues agree with an SVD oracle") {
    std::mt19937_64 rng(9);
    Matrix h = random_matrix(50, 16, rng);
    auto e = symmetric_eig(h.transpose() * h);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(h);
    for (Eigen::Index i = 0; i < 16; ++i) CHECK(std::abs(std::sqrt(e.values(i)) - svd.singularValues()(i)) < 1e-6);
  }
}
