#pragma once

#include <cstdint>
#include <span>

#include "hsva/numerics/graph.hpp"

/// Primitive catalogue of the tape. Every op checks shapes, records its
/// output and the closure that routes gradients to its inputs. Reductions
/// accumulate in 64-bit regardless of storage precision.
namespace hsva::ops {

/// x * w + b, with w (in x out) and b (1 x out) broadcast over rows.
template <typename Real>
Var affine(Graph<Real>& g, Var x, Var w, Var b);

/// Matrix product a * b.
template <typename Real>
Var matmul(Graph<Real>& g, Var a, Var b);

template <typename Real>
Var relu(Graph<Real>& g, Var x);

template <typename Real>
Var exp(Graph<Real>& g, Var x);

/// Natural log; every entry must be > 0.
template <typename Real>
Var log(Graph<Real>& g, Var x);

/// Square root; entries must be >= 0. The gradient at 0 is taken as 0.
template <typename Real>
Var sqrt(Graph<Real>& g, Var x);

/// |x|, subgradient 0 at 0.
template <typename Real>
Var abs(Graph<Real>& g, Var x);

template <typename Real>
Var square(Graph<Real>& g, Var x);

template <typename Real>
Var add(Graph<Real>& g, Var a, Var b);

template <typename Real>
Var sub(Graph<Real>& g, Var a, Var b);

/// Elementwise product.
template <typename Real>
Var mul(Graph<Real>& g, Var a, Var b);

template <typename Real>
Var scale(Graph<Real>& g, Var x, double factor);

template <typename Real>
Var add_scalar(Graph<Real>& g, Var x, double c);

/// 1x1 sum of all entries.
template <typename Real>
Var sum(Graph<Real>& g, Var x);

/// 1x1 mean of all entries.
template <typename Real>
Var mean(Graph<Real>& g, Var x);

/// rows x 1 per-row sums.
template <typename Real>
Var row_sum(Graph<Real>& g, Var x);

/// Row-wise softmax (max-shifted).
template <typename Real>
Var softmax_rows(Graph<Real>& g, Var logits);

/// Sorts every column ascending. Gradients are routed back through the
/// sorting permutation; ties keep their original (stable) order.
template <typename Real>
Var sort_columns(Graph<Real>& g, Var x);

/// Unbiased sample covariance (cols x cols) of the rows of x; needs >= 2 rows.
template <typename Real>
Var covariance(Graph<Real>& g, Var x);

/// Mean negative log-likelihood of `labels` under softmax(logits).
template <typename Real>
Var cross_entropy_with_logits(Graph<Real>& g, Var logits, std::span<const std::uint32_t> labels);

}  // namespace hsva::ops
