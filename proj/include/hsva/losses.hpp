#pragma once

#include <cstdint>
#include <span>

#include "hsva/numerics/graph.hpp"

namespace hsva {

/// Diagonal Gaussians, one per row. Variance is held as log-variance so that
/// it is strictly positive by construction.
template <typename Real>
struct GaussianParams {
  MatrixT<Real> mu;
  MatrixT<Real> logvar;

  /// Builds from an explicit variance matrix; every entry must be > 0.
  static GaussianParams from_variance(MatrixT<Real> mu, const MatrixT<Real>& variance);

  MatrixT<Real> variance() const { return logvar.array().exp().matrix(); }
  Eigen::Index rows() const { return mu.rows(); }
  Eigen::Index dim() const { return mu.cols(); }
};

/// The same pair, recorded on a graph.
struct GaussianVars {
  Var mu;
  Var logvar;
};

template <typename Real>
GaussianVars record(Graph<Real>& g, const GaussianParams<Real>& p) {
  if (p.mu.rows() != p.logvar.rows() || p.mu.cols() != p.logvar.cols()) {
    throw ShapeError("gaussian: mu " + shape_string(p.mu) + " vs log-variance " + shape_string(p.logvar));
  }
  return {g.constant(p.mu, "gaussian mean"), g.constant(p.logvar, "gaussian log-variance")};
}

namespace losses {

/// Batch mean of KL(N(mu, diag(var)) || N(0, I)) =
/// 0.5 * sum_j (mu_j^2 + var_j - log var_j - 1).
template <typename Real>
Var kl_to_standard_normal(Graph<Real>& g, GaussianVars gauss);

/// Batch mean of the per-sample L1 distance.
template <typename Real>
Var l1_reconstruction(Graph<Real>& g, Var target, Var reconstruction);

struct CrossEntropy {
  Var loss;   // mean negative log-likelihood
  Var probs;  // row-stochastic predictions
};

template <typename Real>
CrossEntropy softmax_cross_entropy(Graph<Real>& g, Var logits, std::span<const std::uint32_t> labels);

/// Sliced Wasserstein discrepancy between two prediction batches.
///
/// Both batches are projected on every direction (rows of `directions`),
/// each projected column is sorted, and the squared differences of the
/// sorted sequences are averaged over samples (the 1-D squared
/// 2-Wasserstein distance) and then over directions.
template <typename Real>
Var sliced_wasserstein_discrepancy(Graph<Real>& g, Var p1, Var p2, const MatrixT<Real>& directions);

/// Batch mean of the closed-form 2-Wasserstein distance between row-paired
/// diagonal Gaussians: sqrt(|mu_x - mu_a|^2 + |sqrt(var_x) - sqrt(var_a)|^2).
template <typename Real>
Var gaussian_w2(Graph<Real>& g, GaussianVars gx, GaussianVars ga);

/// ||C_s - C_t||_F^2 / (4 d^2) with unbiased sample covariances.
template <typename Real>
Var coral(Graph<Real>& g, Var source, Var target);

/// Exactly -coral(seen_visual_latent, unseen_semantic_latent).
template <typename Real>
Var icoral(Graph<Real>& g, Var seen_visual_latent, Var unseen_semantic_latent);

// Value-level evaluation of the same definitions, returning 64-bit scalars.
template <typename Real>
double kl_to_standard_normal(const GaussianParams<Real>& gauss);
template <typename Real>
double l1_reconstruction(const MatrixT<Real>& target, const MatrixT<Real>& reconstruction);
template <typename Real>
double softmax_cross_entropy(const MatrixT<Real>& logits, std::span<const std::uint32_t> labels,
                             MatrixT<Real>* probs = nullptr);
template <typename Real>
double sliced_wasserstein_discrepancy(const MatrixT<Real>& p1, const MatrixT<Real>& p2,
                                      const MatrixT<Real>& directions);
template <typename Real>
double gaussian_w2(const GaussianParams<Real>& gx, const GaussianParams<Real>& ga);
template <typename Real>
double coral(const MatrixT<Real>& source, const MatrixT<Real>& target);
template <typename Real>
double icoral(const MatrixT<Real>& seen_visual_latent, const MatrixT<Real>& unseen_semantic_latent);

}  // namespace losses
}  // namespace hsva
