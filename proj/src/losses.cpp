#include "hsva/losses.hpp"

#include <string>

#include "hsva/numerics/ops.hpp"

namespace hsva {

template <typename Real>
GaussianParams<Real> GaussianParams<Real>::from_variance(MatrixT<Real> mu, const MatrixT<Real>& variance) {
  if (mu.rows() != variance.rows() || mu.cols() != variance.cols()) {
    throw ShapeError("gaussian: mu " + shape_string(mu) + " vs variance " + shape_string(variance));
  }
  if ((variance.array() <= Real(0)).any()) throw NumericalError("gaussian: variance must be strictly positive");
  GaussianParams out;
  out.mu = std::move(mu);
  out.logvar = variance.array().log().matrix();
  return out;
}

namespace losses {
namespace {

template <typename Real>
void require_same(Graph<Real>& g, Var a, Var b, const char* what) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(av) + " vs " + shape_string(bv));
  }
}

template <typename Real>
double evaluate(Graph<Real>& g, Var v) {
  return static_cast<double>(g.scalar(v));
}

}  // namespace

template <typename Real>
Var kl_to_standard_normal(Graph<Real>& g, GaussianVars gauss) {
  require_same(g, gauss.mu, gauss.logvar, "kl_to_standard_normal");
  const auto& mu = g.value(gauss.mu);
  if (mu.rows() == 0) throw ShapeError("kl_to_standard_normal: empty batch");
  const double batch = static_cast<double>(mu.rows());
  const double entries = static_cast<double>(mu.size());
  Var terms = ops::add(g, ops::square(g, gauss.mu), ops::sub(g, ops::exp(g, gauss.logvar), gauss.logvar));
  Var total = ops::add_scalar(g, ops::sum(g, terms), -entries);
  return ops::scale(g, total, 0.5 / batch);
}

template <typename Real>
Var l1_reconstruction(Graph<Real>& g, Var target, Var reconstruction) {
  require_same(g, target, reconstruction, "l1_reconstruction");
  const auto rows = g.value(target).rows();
  if (rows == 0) throw ShapeError("l1_reconstruction: empty batch");
  Var dist = ops::sum(g, ops::abs(g, ops::sub(g, target, reconstruction)));
  return ops::scale(g, dist, 1.0 / static_cast<double>(rows));
}

template <typename Real>
CrossEntropy softmax_cross_entropy(Graph<Real>& g, Var logits, std::span<const std::uint32_t> labels) {
  CrossEntropy out;
  out.loss = ops::cross_entropy_with_logits(g, logits, labels);
  out.probs = ops::softmax_rows(g, logits);
  return out;
}

template <typename Real>
Var sliced_wasserstein_discrepancy(Graph<Real>& g, Var p1, Var p2, const MatrixT<Real>& directions) {
  require_same(g, p1, p2, "sliced_wasserstein_discrepancy");
  const auto& pv = g.value(p1);
  if (pv.rows() == 0) throw ShapeError("sliced_wasserstein_discrepancy: batch size is 0");
  if (directions.rows() == 0) throw ShapeError("sliced_wasserstein_discrepancy: no projection directions");
  if (directions.cols() != pv.cols()) {
    throw ShapeError("sliced_wasserstein_discrepancy: directions have dimension " + std::to_string(directions.cols()) +
                     ", predictions have " + std::to_string(pv.cols()));
  }
  Var theta_t = g.constant(directions.transpose(), "projection directions");
  Var s1 = ops::sort_columns(g, ops::matmul(g, p1, theta_t));
  Var s2 = ops::sort_columns(g, ops::matmul(g, p2, theta_t));
  return ops::mean(g, ops::square(g, ops::sub(g, s1, s2)));
}

template <typename Real>
Var gaussian_w2(Graph<Real>& g, GaussianVars gx, GaussianVars ga) {
  require_same(g, gx.mu, ga.mu, "gaussian_w2");
  require_same(g, gx.logvar, ga.logvar, "gaussian_w2");
  require_same(g, gx.mu, gx.logvar, "gaussian_w2");
  if (g.value(gx.mu).rows() == 0) throw ShapeError("gaussian_w2: empty batch");
  Var mean_term = ops::row_sum(g, ops::square(g, ops::sub(g, gx.mu, ga.mu)));
  Var sd_x = ops::exp(g, ops::scale(g, gx.logvar, 0.5));
  Var sd_a = ops::exp(g, ops::scale(g, ga.logvar, 0.5));
  Var sd_term = ops::row_sum(g, ops::square(g, ops::sub(g, sd_x, sd_a)));
  return ops::mean(g, ops::sqrt(g, ops::add(g, mean_term, sd_term)));
}

template <typename Real>
Var coral(Graph<Real>& g, Var source, Var target) {
  const auto& sv = g.value(source);
  const auto& tv = g.value(target);
  if (sv.cols() != tv.cols()) {
    throw ShapeError("coral: feature dimensions differ " + shape_string(sv) + " vs " + shape_string(tv));
  }
  if (sv.rows() < 2 || tv.rows() < 2) {
    throw ShapeError("coral: each batch needs at least 2 rows, got " + std::to_string(sv.rows()) + " and " +
                     std::to_string(tv.rows()));
  }
  const double d = static_cast<double>(sv.cols());
  Var diff = ops::sub(g, ops::covariance(g, source), ops::covariance(g, target));
  return ops::scale(g, ops::sum(g, ops::square(g, diff)), 1.0 / (4.0 * d * d));
}

template <typename Real>
Var icoral(Graph<Real>& g, Var seen_visual_latent, Var unseen_semantic_latent) {
  return ops::scale(g, coral(g, seen_visual_latent, unseen_semantic_latent), -1.0);
}

template <typename Real>
double kl_to_standard_normal(const GaussianParams<Real>& gauss) {
  Graph<Real> g;
  return evaluate(g, kl_to_standard_normal(g, record(g, gauss)));
}

template <typename Real>
double l1_reconstruction(const MatrixT<Real>& target, const MatrixT<Real>& reconstruction) {
  Graph<Real> g;
  return evaluate(g, l1_reconstruction(g, g.constant(target), g.constant(reconstruction)));
}

template <typename Real>
double softmax_cross_entropy(const MatrixT<Real>& logits, std::span<const std::uint32_t> labels,
                             MatrixT<Real>* probs) {
  Graph<Real> g;
  auto ce = softmax_cross_entropy(g, g.constant(logits, "logits"), labels);
  if (probs != nullptr) *probs = g.value(ce.probs);
  return evaluate(g, ce.loss);
}

template <typename Real>
double sliced_wasserstein_discrepancy(const MatrixT<Real>& p1, const MatrixT<Real>& p2,
                                      const MatrixT<Real>& directions) {
  Graph<Real> g;
  return evaluate(g, sliced_wasserstein_discrepancy(g, g.constant(p1), g.constant(p2), directions));
}

template <typename Real>
double gaussian_w2(const GaussianParams<Real>& gx, const GaussianParams<Real>& ga) {
  Graph<Real> g;
  return evaluate(g, gaussian_w2(g, record(g, gx), record(g, ga)));
}

template <typename Real>
double coral(const MatrixT<Real>& source, const MatrixT<Real>& target) {
  Graph<Real> g;
  return evaluate(g, coral(g, g.constant(source), g.constant(target)));
}

template <typename Real>
double icoral(const MatrixT<Real>& seen_visual_latent, const MatrixT<Real>& unseen_semantic_latent) {
  Graph<Real> g;
  return evaluate(g, icoral(g, g.constant(seen_visual_latent), g.constant(unseen_semantic_latent)));
}

#define HSVA_INSTANTIATE_LOSSES(Real)                                                                      \
  template Var kl_to_standard_normal<Real>(Graph<Real>&, GaussianVars);                                    \
  template Var l1_reconstruction<Real>(Graph<Real>&, Var, Var);                                            \
  template CrossEntropy softmax_cross_entropy<Real>(Graph<Real>&, Var, std::span<const std::uint32_t>);   \
  template Var sliced_wasserstein_discrepancy<Real>(Graph<Real>&, Var, Var, const MatrixT<Real>&);        \
  template Var gaussian_w2<Real>(Graph<Real>&, GaussianVars, GaussianVars);                                \
  template Var coral<Real>(Graph<Real>&, Var, Var);                                                        \
  template Var icoral<Real>(Graph<Real>&, Var, Var);                                                       \
  template double kl_to_standard_normal<Real>(const GaussianParams<Real>&);                                \
  template double l1_reconstruction<Real>(const MatrixT<Real>&, const MatrixT<Real>&);                     \
  template double softmax_cross_entropy<Real>(const MatrixT<Real>&, std::span<const std::uint32_t>,       \
                                              MatrixT<Real>*);                                             \
  template double sliced_wasserstein_discrepancy<Real>(const MatrixT<Real>&, const MatrixT<Real>&,        \
                                                       const MatrixT<Real>&);                              \
  template double gaussian_w2<Real>(const GaussianParams<Real>&, const GaussianParams<Real>&);             \
  template double coral<Real>(const MatrixT<Real>&, const MatrixT<Real>&);                                 \
  template double icoral<Real>(const MatrixT<Real>&, const MatrixT<Real>&);

HSVA_INSTANTIATE_LOSSES(float)
HSVA_INSTANTIATE_LOSSES(double)

#undef HSVA_INSTANTIATE_LOSSES

}  // namespace losses

template struct GaussianParams<float>;
template struct GaussianParams<double>;

}  // namespace hsva
