#include "hsva/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

namespace hsva::ops {
namespace {

template <typename Real>
void require_same_shape(const MatrixT<Real>& a, const MatrixT<Real>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
}

// Column sums of m accumulated in 64-bit, as a 1 x cols row.
template <typename Real>
MatrixT<Real> column_sums64(const MatrixT<Real>& m) {
  std::vector<double> acc(static_cast<std::size_t>(m.cols()), 0.0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Real* row = m.data() + i * m.cols();
    for (Eigen::Index j = 0; j < m.cols(); ++j) acc[static_cast<std::size_t>(j)] += row[j];
  }
  MatrixT<Real> out(1, m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out(0, j) = static_cast<Real>(acc[static_cast<std::size_t>(j)]);
  return out;
}

template <typename Real>
MatrixT<Real> scalar_matrix(double v) {
  MatrixT<Real> m(1, 1);
  m(0, 0) = static_cast<Real>(v);
  return m;
}

}  // namespace

template <typename Real>
Var affine(Graph<Real>& g, Var x, Var w, Var b) {
  const auto& xv = g.value(x);
  const auto& wv = g.value(w);
  const auto& bv = g.value(b);
  if (xv.cols() != wv.rows()) {
    throw ShapeError("affine: input has " + std::to_string(xv.cols()) + " columns, layer expects " +
                     std::to_string(wv.rows()));
  }
  if (bv.rows() != 1 || bv.cols() != wv.cols()) {
    throw ShapeError("affine: bias " + shape_string(bv) + " does not match weight " + shape_string(wv));
  }
  MatrixT<Real> out(xv.rows(), wv.cols());
  out.noalias() = xv * wv;
  out.rowwise() += bv.row(0);
  return g.record(std::move(out), {x, w, b}, [x, w, b](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    if (gr.requires_grad(x)) gr.accumulate(x, go * gr.value(w).transpose());
    if (gr.requires_grad(w)) gr.accumulate(w, gr.value(x).transpose() * go);
    if (gr.requires_grad(b)) gr.accumulate(b, column_sums64(go));
  });
}

template <typename Real>
Var matmul(Graph<Real>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(av) + " * " + shape_string(bv));
  }
  MatrixT<Real> out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  return g.record(std::move(out), {a, b}, [a, b](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    if (gr.requires_grad(a)) gr.accumulate(a, go * gr.value(b).transpose());
    if (gr.requires_grad(b)) gr.accumulate(b, gr.value(a).transpose() * go);
  });
}

template <typename Real>
Var relu(Graph<Real>& g, Var x) {
  MatrixT<Real> out = g.value(x).cwiseMax(Real(0));
  return g.record(std::move(out), {x}, [x](Graph<Real>& gr, Var self, const MatrixT<Real>& go) {
    const auto& y = gr.value(self);
    gr.accumulate(x, (y.array() > Real(0)).select(go, Real(0)).matrix());
  });
}

template <typename Real>
Var exp(Graph<Real>& g, Var x) {
  MatrixT<Real> out = g.value(x).array().exp().matrix();
  return g.record(std::move(out), {x}, [x](Graph<Real>& gr, Var self, const MatrixT<Real>& go) {
    gr.accumulate(x, go.cwiseProduct(gr.value(self)));
  });
}

template <typename Real>
Var log(Graph<Real>& g, Var x) {
  const auto& xv = g.value(x);
  if ((xv.array() <= Real(0)).any()) throw NumericalError("log: non-positive argument");
  MatrixT<Real> out = xv.array().log().matrix();
  return g.record(std::move(out), {x}, [x](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    gr.accumulate(x, go.cwiseQuotient(gr.value(x)));
  });
}

template <typename Real>
Var sqrt(Graph<Real>& g, Var x) {
  const auto& xv = g.value(x);
  if ((xv.array() < Real(0)).any()) throw NumericalError("sqrt: negative argument");
  MatrixT<Real> out = xv.array().sqrt().matrix();
  return g.record(std::move(out), {x}, [x](Graph<Real>& gr, Var self, const MatrixT<Real>& go) {
    const auto& y = gr.value(self);
    gr.accumulate(x, (y.array() > Real(0)).select(go.array() / (Real(2) * y.array()), Real(0)).matrix());
  });
}

template <typename Real>
Var abs(Graph<Real>& g, Var x) {
  MatrixT<Real> out = g.value(x).cwiseAbs();
  return g.record(std::move(out), {x}, [x](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    gr.accumulate(x, go.cwiseProduct(gr.value(x).unaryExpr([](Real v) {
      return v > Real(0) ? Real(1) : (v < Real(0) ? Real(-1) : Real(0));
    })));
  });
}

template <typename Real>
Var square(Graph<Real>& g, Var x) {
  MatrixT<Real> out = g.value(x).array().square().matrix();
  return g.record(std::move(out), {x}, [x](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    gr.accumulate(x, (Real(2) * go.array() * gr.value(x).array()).matrix());
  });
}

template <typename Real>
Var add(Graph<Real>& g, Var a, Var b) {
  require_same_shape(g.value(a), g.value(b), "add");
  MatrixT<Real> out = g.value(a) + g.value(b);
  return g.record(std::move(out), {a, b}, [a, b](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    gr.accumulate(a, go);
    gr.accumulate(b, go);
  });
}

template <typename Real>
Var sub(Graph<Real>& g, Var a, Var b) {
  require_same_shape(g.value(a), g.value(b), "sub");
  MatrixT<Real> out = g.value(a) - g.value(b);
  return g.record(std::move(out), {a, b}, [a, b](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    gr.accumulate(a, go);
    gr.accumulate(b, -go);
  });
}

template <typename Real>
Var mul(Graph<Real>& g, Var a, Var b) {
  require_same_shape(g.value(a), g.value(b), "mul");
  MatrixT<Real> out = g.value(a).cwiseProduct(g.value(b));
  return g.record(std::move(out), {a, b}, [a, b](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    if (gr.requires_grad(a)) gr.accumulate(a, go.cwiseProduct(gr.value(b)));
    if (gr.requires_grad(b)) gr.accumulate(b, go.cwiseProduct(gr.value(a)));
  });
}

template <typename Real>
Var scale(Graph<Real>& g, Var x, double factor) {
  const Real f = static_cast<Real>(factor);
  MatrixT<Real> out = g.value(x) * f;
  return g.record(std::move(out), {x}, [x, f](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    gr.accumulate(x, go * f);
  });
}

template <typename Real>
Var add_scalar(Graph<Real>& g, Var x, double c) {
  MatrixT<Real> out = (g.value(x).array() + static_cast<Real>(c)).matrix();
  return g.record(std::move(out), {x}, [x](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    gr.accumulate(x, go);
  });
}

template <typename Real>
Var sum(Graph<Real>& g, Var x) {
  return g.record(scalar_matrix<Real>(sum64(g.value(x))), {x},
                  [x](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
                    const auto& xv = gr.value(x);
                    gr.accumulate(x, MatrixT<Real>::Constant(xv.rows(), xv.cols(), go(0, 0)));
                  });
}

template <typename Real>
Var mean(Graph<Real>& g, Var x) {
  const auto& xv = g.value(x);
  if (xv.size() == 0) throw ShapeError("mean: empty input");
  const double n = static_cast<double>(xv.size());
  return g.record(scalar_matrix<Real>(sum64(xv) / n), {x},
                  [x, n](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
                    const auto& v = gr.value(x);
                    gr.accumulate(x, MatrixT<Real>::Constant(v.rows(), v.cols(),
                                                             static_cast<Real>(go(0, 0) / n)));
                  });
}

template <typename Real>
Var row_sum(Graph<Real>& g, Var x) {
  const auto& xv = g.value(x);
  MatrixT<Real> out(xv.rows(), 1);
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < xv.cols(); ++j) acc += xv(i, j);
    out(i, 0) = static_cast<Real>(acc);
  }
  return g.record(std::move(out), {x}, [x](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    const auto& v = gr.value(x);
    gr.accumulate(x, go.replicate(1, v.cols()));
  });
}

template <typename Real>
Var softmax_rows(Graph<Real>& g, Var logits) {
  const auto& lv = g.value(logits);
  MatrixT<Real> p(lv.rows(), lv.cols());
  for (Eigen::Index i = 0; i < lv.rows(); ++i) {
    const Real m = lv.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < lv.cols(); ++j) z += std::exp(static_cast<double>(lv(i, j) - m));
    for (Eigen::Index j = 0; j < lv.cols(); ++j) {
      p(i, j) = static_cast<Real>(std::exp(static_cast<double>(lv(i, j) - m)) / z);
    }
  }
  return g.record(std::move(p), {logits}, [logits](Graph<Real>& gr, Var self, const MatrixT<Real>& go) {
    const auto& pv = gr.value(self);
    MatrixT<Real> dx(pv.rows(), pv.cols());
    for (Eigen::Index i = 0; i < pv.rows(); ++i) {
      double dot = 0.0;
      for (Eigen::Index j = 0; j < pv.cols(); ++j) dot += static_cast<double>(go(i, j)) * pv(i, j);
      for (Eigen::Index j = 0; j < pv.cols(); ++j) {
        dx(i, j) = static_cast<Real>(pv(i, j) * (go(i, j) - dot));
      }
    }
    gr.accumulate(logits, dx);
  });
}

template <typename Real>
Var sort_columns(Graph<Real>& g, Var x) {
  const auto& xv = g.value(x);
  const Eigen::Index rows = xv.rows();
  const Eigen::Index cols = xv.cols();
  // perm[j * rows + i] is the source row of sorted position i in column j.
  auto perm = std::make_shared<std::vector<Eigen::Index>>(static_cast<std::size_t>(rows * cols));
  MatrixT<Real> out(rows, cols);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows));
  for (Eigen::Index j = 0; j < cols; ++j) {
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return xv(a, j) < xv(b, j); });
    for (Eigen::Index i = 0; i < rows; ++i) {
      (*perm)[static_cast<std::size_t>(j * rows + i)] = idx[static_cast<std::size_t>(i)];
      out(i, j) = xv(idx[static_cast<std::size_t>(i)], j);
    }
  }
  return g.record(std::move(out), {x}, [x, perm, rows, cols](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    MatrixT<Real> dx(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) dx((*perm)[static_cast<std::size_t>(j * rows + i)], j) = go(i, j);
    }
    gr.accumulate(x, dx);
  });
}

template <typename Real>
Var covariance(Graph<Real>& g, Var x) {
  const auto& xv = g.value(x);
  const Eigen::Index n = xv.rows();
  if (n < 2) throw ShapeError("covariance: needs at least 2 rows, got " + std::to_string(n));
  MatrixT<Real> mu = column_sums64(xv) / static_cast<Real>(n);
  auto centered = std::make_shared<MatrixT<Real>>(xv.rowwise() - mu.row(0));
  MatrixT<Real> cov(xv.cols(), xv.cols());
  cov.noalias() = centered->transpose() * *centered;
  cov /= static_cast<Real>(n - 1);
  return g.record(std::move(cov), {x}, [x, centered, n](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
    MatrixT<Real> sym = go + go.transpose();
    // Rows of (centered * sym) already sum to zero, so no re-centering is needed.
    gr.accumulate(x, (*centered * sym) / static_cast<Real>(n - 1));
  });
}

template <typename Real>
Var cross_entropy_with_logits(Graph<Real>& g, Var logits, std::span<const std::uint32_t> labels) {
  const auto& lv = g.value(logits);
  const Eigen::Index rows = lv.rows();
  const Eigen::Index k = lv.cols();
  if (static_cast<std::size_t>(rows) != labels.size()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) +
                     " rows");
  }
  if (rows == 0) throw ShapeError("cross_entropy: empty batch");
  auto probs = std::make_shared<MatrixT<Real>>(rows, k);
  auto lab = std::make_shared<std::vector<std::uint32_t>>(labels.begin(), labels.end());
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const std::uint32_t y = labels[static_cast<std::size_t>(i)];
    if (y >= static_cast<std::uint32_t>(k)) {
      throw ShapeError("cross_entropy: label " + std::to_string(y) + " at row " + std::to_string(i) +
                       " out of range [0, " + std::to_string(k) + ")");
    }
    const double m = static_cast<double>(lv.row(i).maxCoeff());
    double z = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) z += std::exp(static_cast<double>(lv(i, j)) - m);
    const double lse = m + std::log(z);
    total += lse - static_cast<double>(lv(i, y));
    for (Eigen::Index j = 0; j < k; ++j) {
      (*probs)(i, j) = static_cast<Real>(std::exp(static_cast<double>(lv(i, j)) - lse));
    }
  }
  return g.record(scalar_matrix<Real>(total / static_cast<double>(rows)), {logits},
                  [logits, probs, lab](Graph<Real>& gr, Var, const MatrixT<Real>& go) {
                    MatrixT<Real> d = *probs;
                    for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, (*lab)[static_cast<std::size_t>(i)]) -= Real(1);
                    gr.accumulate(logits, d * static_cast<Real>(go(0, 0) / static_cast<double>(d.rows())));
                  });
}

#define HSVA_INSTANTIATE_OPS(Real)                                                         \
  template Var affine<Real>(Graph<Real>&, Var, Var, Var);                                  \
  template Var matmul<Real>(Graph<Real>&, Var, Var);                                       \
  template Var relu<Real>(Graph<Real>&, Var);                                              \
  template Var exp<Real>(Graph<Real>&, Var);                                               \
  template Var log<Real>(Graph<Real>&, Var);                                               \
  template Var sqrt<Real>(Graph<Real>&, Var);                                              \
  template Var abs<Real>(Graph<Real>&, Var);                                               \
  template Var square<Real>(Graph<Real>&, Var);                                            \
  template Var add<Real>(Graph<Real>&, Var, Var);                                          \
  template Var sub<Real>(Graph<Real>&, Var, Var);                                          \
  template Var mul<Real>(Graph<Real>&, Var, Var);                                          \
  template Var scale<Real>(Graph<Real>&, Var, double);                                     \
  template Var add_scalar<Real>(Graph<Real>&, Var, double);                                \
  template Var sum<Real>(Graph<Real>&, Var);                                               \
  template Var mean<Real>(Graph<Real>&, Var);                                              \
  template Var row_sum<Real>(Graph<Real>&, Var);                                           \
  template Var softmax_rows<Real>(Graph<Real>&, Var);                                      \
  template Var sort_columns<Real>(Graph<Real>&, Var);                                      \
  template Var covariance<Real>(Graph<Real>&, Var);                                        \
  template Var cross_entropy_with_logits<Real>(Graph<Real>&, Var, std::span<const std::uint32_t>);

HSVA_INSTANTIATE_OPS(float)
HSVA_INSTANTIATE_OPS(double)

#undef HSVA_INSTANTIATE_OPS

}  // namespace hsva::ops
