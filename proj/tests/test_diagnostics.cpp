#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "gcllab/diagnostics.hpp"
#include "gcllab/graphcore.hpp"

using namespace gcl;

namespace {

Matrix randm(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> d(0, s);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

Graph random_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < p) e.emplace_back(i, j);
  return Graph::from_edges(n, e, Matrix::Zero(static_cast<Eigen::Index>(n), 1));
}

double cosine_loop(const Matrix& h) {
  double s = 0;
  int cnt = 0;
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    for (Eigen::Index j = i + 1; j < h.rows(); ++j) {
      double ni = h.row(i).norm(), nj = h.row(j).norm();
      s += (ni > 0 && nj > 0) ? h.row(i).dot(h.row(j)) / (ni * nj) : 0.0;
      ++cnt;
    }
  return s / cnt;
}

// Row echelon rank with partial pivoting.
int elimination_rank(Matrix m, double tol) {
  int rank = 0;
  const Eigen::Index rows = m.rows(), cols = m.cols();
  for (Eigen::Index c = 0; c < cols && rank < rows; ++c) {
    Eigen::Index piv = rank;
    for (Eigen::Index r = rank; r < rows; ++r)
      if (std::abs(m(r, c)) > std::abs(m(piv, c))) piv = r;
    if (std::abs(m(piv, c)) < tol) continue;
    m.row(piv).swap(m.row(rank));
    for (Eigen::Index r = rank + 1; r < rows; ++r) m.row(r) -= (m(r, c) / m(rank, c)) * m.row(rank);
    ++rank;
  }
  return rank;
}

}  // namespace

TEST_CASE("avg_pairwise_cosine basic values") {
  Matrix same(4, 3);
  same.rowwise() = Eigen::RowVector3d(1, 2, 3);
  CHECK(avg_pairwise_cosine(same) == Catch::Approx(1.0).margin(1e-12));
  CHECK(avg_pairwise_cosine(from_rows({{1, 0}, {0, 2}})) == Catch::Approx(0.0).margin(1e-15));
  CHECK_THROWS_AS(avg_pairwise_cosine(Matrix::Ones(1, 3)), DataError);
  CHECK_THROWS_AS(avg_pairwise_cosine(Matrix(0, 3)), DataError);
}

TEST_CASE("avg_pairwise_cosine matches the pair loop and stays in range") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> nd(2, 25), dd(1, 6);
    Matrix h = randm(nd(rng), dd(rng), rng);
    if (trial % 7 == 0) h.row(0).setZero();
    double v = avg_pairwise_cosine(h);
    CHECK(std::abs(v - cosine_loop(h)) < 1e-12);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  std::mt19937_64 r2(5);
  Matrix h = randm(5, 3, r2);
  CHECK(std::abs(avg_pairwise_cosine(h) - cosine_loop(h)) < 1e-12);
}

TEST_CASE("singular_spectrum closed forms") {
  auto id = singular_spectrum(Matrix::Identity(5, 5));
  CHECK(id.effective_rank == 5);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(id.singular_values(i) == Catch::Approx(1.0).margin(1e-12));

  Eigen::VectorXd u(4), v(3);
  u << 1, -2, 0.5, 3;
  v << 2, 1, -1;
  auto r1 = singular_spectrum(u * v.transpose());
  CHECK(r1.effective_rank == 1);
  CHECK(r1.singular_values(0) == Catch::Approx(u.norm() * v.norm()).epsilon(1e-12));
  CHECK(r1.singular_values.size() == 3);

  auto z = singular_spectrum(Matrix::Zero(6, 4));
  CHECK(z.effective_rank == 0);
  CHECK(z.singular_values.size() == 4);
  CHECK(z.singular_values.isZero());

  CHECK_THROWS_AS(singular_spectrum(Matrix::Ones(2, 2), 0.0), ConfigError);
  CHECK_THROWS_AS(singular_spectrum(Matrix::Ones(2, 2), 1.0), ConfigError);
}

TEST_CASE("singular_spectrum rank matches elimination rank") {
  std::mt19937_64 rng(3);
  Matrix h = randm(20, 8, rng);
  CHECK(singular_spectrum(h).effective_rank == 8);
  CHECK(elimination_rank(h, 1e-9) == 8);
  for (int k = 1; k <= 6; ++k) {
    Matrix low = randm(20, k, rng) * randm(k, 8, rng);
    CHECK(singular_spectrum(low).effective_rank == k);
    CHECK(elimination_rank(low, 1e-9) == k);
  }
  Matrix wide = randm(3, 10, rng);
  auto s = singular_spectrum(wide);
  CHECK(s.singular_values.size() == 3);
  CHECK(s.effective_rank == 3);
}

TEST_CASE("singular_spectrum agrees with bidiagonalization SVD") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_int_distribution<int> nd(1, 50), dd(1, 16);
    Matrix h = randm(nd(rng), dd(rng), rng);
    auto s = singular_spectrum(h);
    Eigen::MatrixXd hc = h;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(hc);
    Eigen::VectorXd ref = svd.singularValues();
    REQUIRE(s.singular_values.size() == ref.size());
    for (Eigen::Index i = 0; i < ref.size(); ++i) {
      CHECK(std::abs(s.singular_values(i) - ref(i)) < 1e-6);
      CHECK(s.singular_values(i) >= 0.0);
      if (i > 0) CHECK(s.singular_values(i) <= s.singular_values(i - 1));
    }
    CHECK(s.effective_rank <= std::min(h.rows(), h.cols()));
  }
}

TEST_CASE("singular_spectrum handles large-magnitude rows") {
  // Sum readouts over big graphs give entries in the thousands.
  std::mt19937_64 rng(23);
  for (double scale : {1e3, 1e5}) {
    Matrix h = randm(200, 32, rng, scale);
    h.col(0).array() += 5 * scale;
    auto s = singular_spectrum(h);
    Eigen::MatrixXd hc = h;
    Eigen::VectorXd ref = Eigen::BDCSVD<Eigen::MatrixXd>(hc).singularValues();
    for (Eigen::Index i = 0; i < ref.size(); ++i) CHECK(std::abs(s.singular_values(i) - ref(i)) < 1e-8 * ref(0));
    CHECK(s.effective_rank == 32);
  }
}

TEST_CASE("weight_norms") {
  ModelParams p;
  p.add("zero", Matrix::Zero(2, 3));
  p.add("eye", Matrix::Identity(3, 3));
  std::mt19937_64 rng(1);
  Matrix r = randm(4, 5, rng);
  p.add("rand", r);
  auto w = weight_norms(p);
  REQUIRE(w.size() == 3);
  CHECK(w[0].first == "zero");
  CHECK(w[0].second == 0.0);
  CHECK(w[1].second == Catch::Approx(std::sqrt(3.0)));
  double ss = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i) ss += r.data()[i] * r.data()[i];
  CHECK(w[2].second == Catch::Approx(std::sqrt(ss)).epsilon(1e-14));
}

TEST_CASE("detect_collapse") {
  RunReport empty;
  CHECK_THROWS_AS(detect_collapse(empty), PreconditionError);

  Matrix same = Matrix::Ones(5, 3);
  Matrix orth = Matrix::Identity(4, 4);
  RunReport a, b;
  a.has_final = true;
  a.final_metrics = measure_representations(same, same);
  b.has_final = true;
  b.final_metrics = measure_representations(orth, orth);
  CHECK(detect_collapse(a));
  CHECK_FALSE(detect_collapse(b));

  RunReport traj;
  traj.sim_h = {0.1, 0.5, 0.97};
  CHECK(detect_collapse(traj));

  std::mt19937_64 rng(2);
  for (int k = 0; k < 50; ++k) {
    RunReport r;
    r.has_final = true;
    r.final_metrics.sim_h = std::uniform_real_distribution<double>(-1, 1)(rng);
    if (detect_collapse(r, 0.9))
      for (double t : {0.89, 0.5, 0.0, -0.99}) CHECK(detect_collapse(r, t));
  }
}

TEST_CASE("verify_theorem1") {
  std::mt19937_64 rng(23);
  Graph g = random_graph(5, 0.5, rng);
  auto a = normalize_adjacency(g);
  auto zero = verify_theorem1(Matrix::Zero(5, 3), a);
  CHECK(zero.residual == 0.0);
  CHECK(zero.passed);

  auto r = verify_theorem1(randm(5, 3, rng), a);
  CHECK(r.passed);
  CHECK(r.residual < 1e-8);
  CHECK(r.c_used == Catch::Approx(a.mass));
  CHECK(r.alpha_used == Catch::Approx(a.mass / 2));
  REQUIRE(r.descent_inner_product);
  CHECK(*r.descent_inner_product < 0.0);

  CHECK_THROWS_AS(verify_theorem1(Matrix::Zero(4, 3), a), ShapeError);

  int passed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(2, 30)(rng);
    Graph gi = random_graph(n, std::uniform_real_distribution<double>(0, 0.6)(rng), rng);
    auto res = verify_theorem1(randm(static_cast<Eigen::Index>(n), 4, rng), normalize_adjacency(gi));
    passed += res.passed;
    CHECK(res.passed == (res.residual < res.tolerance));
    CHECK(*res.descent_inner_product <= 1e-12);
  }
  CHECK(passed == 100);
}

TEST_CASE("verify_theorem2") {
  std::mt19937_64 rng(29);
  Graph g = random_graph(6, 0.5, rng);
  auto p = pair_distribution(normalize_adjacency(g));

  auto u = verify_theorem2(randm(6, 4, rng), p, Theorem2Mode::UniformExact);
  CHECK(u.passed);
  CHECK(u.residual < 1e-8);

  auto z = verify_theorem2(Matrix::Zero(6, 4), p, Theorem2Mode::UniformExact);
  CHECK(z.residual == 0.0);

  Matrix same(6, 3);
  same.rowwise() = Eigen::RowVector3d(0.3, -1.0, 0.7);
  auto col = verify_theorem2(same, p, Theorem2Mode::PaperForm);
  REQUIRE(col.cosine);
  CHECK(*col.cosine == Catch::Approx(1.0).margin(1e-12));
  CHECK(col.passed);

  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(2, 30)(rng);
    int d = std::uniform_int_distribution<int>(1, 8)(rng);
    Graph gi = random_graph(n, 0.3, rng);
    auto res = verify_theorem2(randm(static_cast<Eigen::Index>(n), d, rng), pair_distribution(normalize_adjacency(gi)),
                               Theorem2Mode::UniformExact);
    CHECK(res.passed);
  }
}

TEST_CASE("verify_theorem3") {
  std::mt19937_64 rng(31);
  Graph g = random_graph(7, 0.4, rng);
  auto a = normalize_adjacency(g);
  auto p = pair_distribution(a);
  Matrix h = randm(7, 3, rng);

  auto r0 = verify_theorem3(h, a, p, 0.0);
  auto r1 = verify_theorem1(h, a);
  CHECK(r0.passed);
  CHECK(std::abs(r0.residual - r1.residual) < 1e-12);

  auto z = verify_theorem3(Matrix::Zero(7, 3), a, p, 2.0);
  CHECK(z.residual == 0.0);

  for (double alpha : {0.5, 1.0, 5.0, 20.0}) {
    auto r = verify_theorem3(h, a, p, alpha);
    CHECK(r.passed);
    CHECK(r.alpha_used == alpha);
    CHECK(r.convention.find("offset") != std::string::npos);
  }
  CHECK_THROWS_AS(verify_theorem3(h, a, p, -1.0), ConfigError);
}

TEST_CASE("serialization") {
  auto s = singular_spectrum(Matrix::Identity(3, 3));
  auto j = spectrum_to_json(s);
  CHECK(j["effective_rank"] == 3);
  CHECK(j["singular_values"].size() == 3);
  std::string csv = spectrum_to_csv(s);
  CHECK(csv.rfind("index,singular_value\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  std::mt19937_64 rng(1);
  Graph g = random_graph(5, 0.5, rng);
  auto v = verifier_to_json(verify_theorem1(randm(5, 2, rng), normalize_adjacency(g)));
  CHECK(v["passed"] == true);
  CHECK(v.contains("descent_inner_product"));

  RunReport r;
  r.seed = 4;
  r.epochs = 3;
  r.logged_epochs = {0, 2};
  r.loss = {1.0, 0.5};
  r.sim_h = {0.1, 0.2};
  r.sim_z = {0.3, 0.4};
  r.rank_h = {3, 2};
  r.rank_z = {1, 1};
  r.weight_norms = {{"enc.w0", {1.0, 2.0}}};
  r.has_final = true;
  r.final_metrics = {0.2, 0.4, 2, 1};
  r.final_weight_norms = {{"enc.w0", 2.0}};
  r.probe_accuracy = 0.75;
  RunReport back = report_from_json(report_to_json(r));
  CHECK(back.loss == r.loss);
  CHECK(back.rank_h == r.rank_h);
  CHECK(back.weight_norms == r.weight_norms);
  CHECK(back.final_metrics.rank_h == 2);
  CHECK(back.probe_accuracy == r.probe_accuracy);
  CHECK(logged_epoch_schedule(5, 2) == std::vector<int>{0, 2, 4});
  CHECK(logged_epoch_schedule(4, 3) == std::vector<int>{0, 3});
  CHECK(logged_epoch_schedule(5, 3) == std::vector<int>{0, 3, 4});
}
