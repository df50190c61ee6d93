#pragma once

#include <limits>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gcllab/errors.hpp"
#include "gcllab/graphcore/normalize.hpp"
#include "gcllab/losses/losses.hpp"
#include "gcllab/models/encoders.hpp"
#include "gcllab/models/params.hpp"
#include "gcllab/numkit/eig.hpp"
#include "gcllab/numkit/ops.hpp"
#include "gcllab/trainer/report.hpp"

namespace gcl {

// Mean cosine over unordered pairs of distinct rows. Zero rows count as
// cosine 0 with everything.
inline double avg_pairwise_cosine(const Matrix& h) {
  const Eigen::Index n = h.rows();
  if (n < 2) throw DataError("avg_pairwise_cosine: need at least 2 rows");
  if (!h.allFinite()) throw DomainError("avg_pairwise_cosine: non-finite entries");
  Matrix u = detail::row_l2_normalize_value(h);
  Vector colsum = u.colwise().sum().transpose();
  double total = colsum.squaredNorm() - u.squaredNorm();  // Σ_{i≠j} u_i·u_j
  double avg = total / (static_cast<double>(n) * static_cast<double>(n - 1));
  return std::clamp(avg, -1.0, 1.0);
}

struct SpectrumReport {
  Vector singular_values;  // descending, length min(n, d)
  int effective_rank = 0;
  double rel_threshold = 1e-4;
};

// Singular values from the eigenvalues of the d×d Gram matrix HᵀH.
inline SpectrumReport singular_spectrum(const Matrix& h, double rel_threshold = 1e-4) {
  if (!(rel_threshold > 0.0 && rel_threshold < 1.0)) throw ConfigError("singular_spectrum: rel_threshold in (0,1)");
  if (!h.allFinite()) throw DomainError("singular_spectrum: non-finite entries");
  SpectrumReport r;
  r.rel_threshold = rel_threshold;
  const Eigen::Index k = std::min(h.rows(), h.cols());
  if (h.cols() == 0 || h.rows() == 0) {
    r.singular_values = Vector::Zero(k);
    return r;
  }
  Matrix gram = h.transpose() * h;
  gram = (0.5 * (gram + gram.transpose())).eval();  // eval: the transpose aliases gram
  EigenDecomposition e = symmetric_eig(gram, 1e-10, 100, false);
  r.singular_values = e.values.head(k).cwiseMax(0.0).cwiseSqrt();
  const double top = r.singular_values.size() ? r.singular_values(0) : 0.0;
  if (top > 0.0)
    for (Eigen::Index i = 0; i < k; ++i)
      if (r.singular_values(i) > rel_threshold * top) ++r.effective_rank;
  return r;
}

inline std::vector<std::pair<std::string, double>> weight_norms(const ModelParams& p) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.emplace_back(p.names[i], p.values[i].norm());
  return out;
}

// True iff the final average cosine similarity of H exceeds the threshold.
inline bool detect_collapse(const RunReport& report, double sim_threshold = 0.95) {
  if (report.has_final) return report.final_metrics.sim_h > sim_threshold;
  if (report.sim_h.empty()) throw PreconditionError("detect_collapse: empty report");
  return report.sim_h.back() > sim_threshold;
}

// Similarity needs two rows; a single-row set (one graph) reports NaN there.
inline RepresentationMetrics measure_representations(const Matrix& h, const Matrix& z, double rel_threshold = 1e-4) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {h.rows() < 2 ? nan : avg_pairwise_cosine(h), z.rows() < 2 ? nan : avg_pairwise_cosine(z),
          singular_spectrum(h, rel_threshold).effective_rank,
          singular_spectrum(z, rel_threshold).effective_rank};
}

struct VerifierResult {
  std::string theorem;
  std::string mode;
  double residual = 0.0;  // max-abs elementwise
  double tolerance = 0.0;
  bool passed = false;
  double alpha_used = 0.0;
  double c_used = 0.0;
  std::optional<double> descent_inner_product;
  std::optional<double> cosine;
  std::string convention;
};

inline nlohmann::json verifier_to_json(const VerifierResult& v) {
  nlohmann::json j = {{"theorem", v.theorem}, {"mode", v.mode},         {"residual", v.residual},
                      {"tolerance", v.tolerance}, {"passed", v.passed}, {"alpha_used", v.alpha_used},
                      {"c_used", v.c_used},     {"convention", v.convention}};
  if (v.descent_inner_product) j["descent_inner_product"] = *v.descent_inner_product;
  if (v.cosine) j["cosine"] = *v.cosine;
  return j;
}

namespace detail {

template <class LossFn>
Matrix loss_gradient(const Matrix& h0, LossFn&& f) {
  Tape t;
  Var h = t.parameter(h0);
  t.backward(f(h));
  return t.grad(h);
}

inline Matrix dense_softmax_gram(const Matrix& h) { return row_softmax_value(h * h.transpose()); }

inline double flat_cosine(const Matrix& a, const Matrix& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.cwiseProduct(b).sum() / (na * nb);
}

}  // namespace detail

// One gradient step of size c/2 on the regularized neighbor alignment loss
// lands exactly on ÂH.
inline VerifierResult verify_theorem1(const Matrix& h, const NormalizedAdjacency& a, double tolerance = 1e-8) {
  if (static_cast<std::size_t>(h.rows()) != a.size()) throw ShapeError("verify_theorem1: rows != node count");
  PairDistribution p = pair_distribution(a);
  Matrix g = detail::loss_gradient(h, [&](const Var& x) { return neighbor_alignment_loss(x, p, true); });
  const double step = a.mass / 2.0;
  Matrix stepped = h - step * g;
  Matrix ah = sparse_times_dense(a.sparse(), h);
  VerifierResult r;
  r.theorem = "1";
  r.mode = "regularized_alignment_step";
  r.residual = max_abs_diff(stepped, ah);
  r.tolerance = tolerance;
  r.passed = r.residual < tolerance;
  r.alpha_used = step;
  r.c_used = a.mass;
  r.descent_inner_product = g.cwiseProduct(ah - h).sum();
  r.convention = "H - (c/2) grad(L_align + |H|^2/c) vs A_hat H";
  return r;
}

enum class Theorem2Mode { UniformExact, PaperForm };

inline VerifierResult verify_theorem2(const Matrix& h, const PairDistribution& p, Theorem2Mode mode,
                                      double tolerance = 1e-8, double min_cosine = 0.9) {
  const Eigen::Index n = h.rows();
  if (n != p.marginal.size()) throw ShapeError("verify_theorem2: rows != node count");
  VerifierResult r;
  r.theorem = "2";
  r.c_used = p.mass;
  Matrix s = detail::dense_softmax_gram(h);
  if (mode == Theorem2Mode::UniformExact) {
    PairDistribution uniform;
    uniform.marginal = Vector::Constant(n, 1.0 / static_cast<double>(n));
    uniform.joint = SparseMatrix::identity(static_cast<std::size_t>(n));
    uniform.mass = 1.0;
    Matrix g = detail::loss_gradient(h, [&](const Var& x) { return neighbor_uniformity_loss(x, uniform); });
    Matrix closed = (s + s.transpose()) * h / static_cast<double>(n);
    r.mode = "uniform_exact";
    r.residual = max_abs_diff(g, closed);
    r.tolerance = tolerance;
    r.passed = r.residual < tolerance;
    r.convention = "grad with P(x)=1/n vs (S+S^T)H/n, S=row_softmax(HH^T)";
  } else {
    Matrix g = detail::loss_gradient(h, [&](const Var& x) { return neighbor_uniformity_loss(x, p); });
    Matrix cn = p.marginal.asDiagonal() * s * h;
    r.mode = "paper_form";
    r.cosine = detail::flat_cosine(g, cn);
    r.residual = max_abs_diff(g, cn);
    r.tolerance = min_cosine;
    r.passed = *r.cosine > min_cosine;
    r.convention = "cosine(grad with pair-marginal P, D*row_softmax(HH^T)*H), D=diag(P)";
  }
  return r;
}

// Composite update = Theorem-1 step (giving ÂH) plus the ContraNorm
// correction −αDÃH taken from the layer itself; compared against the
// offset form H_new − H = ÂH − αDÃH assembled with dense products.
inline VerifierResult verify_theorem3(const Matrix& h, const NormalizedAdjacency& a, const PairDistribution& p,
                                      double alpha, double tolerance = 1e-8) {
  if (!(alpha >= 0.0)) throw ConfigError("verify_theorem3: alpha must be >= 0");
  if (static_cast<std::size_t>(h.rows()) != a.size()) throw ShapeError("verify_theorem3: rows != node count");
  Matrix g = detail::loss_gradient(h, [&](const Var& x) { return neighbor_alignment_loss(x, p, true); });
  Matrix align_step = h - (a.mass / 2.0) * g;
  Tape t;
  Matrix correction = contranorm(t.constant(h), alpha, p.marginal).value() - h;
  Matrix composite = align_step + correction;

  Matrix dense_a = a.sparse().to_dense();
  const Eigen::Index n = h.rows();
  Matrix theorem_new = (Matrix::Identity(n, n) + dense_a) * h - alpha * p.marginal.asDiagonal() * detail::dense_softmax_gram(h) * h;
  VerifierResult r;
  r.theorem = "3";
  r.mode = "pair_marginal";
  r.residual = max_abs_diff(composite, theorem_new - h);
  r.tolerance = tolerance;
  r.passed = r.residual < tolerance;
  r.alpha_used = alpha;
  r.c_used = a.mass;
  r.convention =
      "offset: composite step (A_hat H - alpha D A_tilde H) compared with H_new - H where "
      "H_new = (I + A_hat)H - alpha D A_tilde H, A_tilde = row_softmax(HH^T), D = diag(P)";
  return r;
}

inline nlohmann::json spectrum_to_json(const SpectrumReport& s) {
  return {{"singular_values", std::vector<double>(s.singular_values.data(), s.singular_values.data() + s.singular_values.size())},
          {"effective_rank", s.effective_rank},
          {"rel_threshold", s.rel_threshold}};
}

inline std::string spectrum_to_csv(const SpectrumReport& s) {
  std::ostringstream os;
  os.precision(17);
  os << "index,singular_value\n";
  for (Eigen::Index i = 0; i < s.singular_values.size(); ++i) os << i << ',' << s.singular_values(i) << '\n';
  return os.str();
}

}  // namespace gcl
