#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <string_view>

#include "hsva/errors.hpp"

namespace hsva {

/// Dense row-major matrix. Batched samples are rows.
template <typename Real>
using MatrixT = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = MatrixT<float>;
using MatrixD = MatrixT<double>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Real>
std::string shape_string(const MatrixT<Real>& m) {
  return shape_string(m.rows(), m.cols());
}

/// True iff every entry is finite. x * 0 is 0 for finite x and NaN otherwise,
/// so one vectorized sum decides it.
template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  if (m.size() == 0) return true;
  return (m.derived().array() * typename Derived::Scalar(0)).sum() == typename Derived::Scalar(0);
}

template <typename Real>
void require_finite(const MatrixT<Real>& m, std::string_view what) {
  if (!all_finite(m)) {
    throw NumericalError("non-finite value in " + std::string(what) + " (" + shape_string(m) + ")");
  }
}

template <typename Real>
void require_shape(const MatrixT<Real>& m, Eigen::Index rows, Eigen::Index cols, std::string_view what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + shape_string(rows, cols) + ", got " +
                     shape_string(m));
  }
}

/// Sum of all entries accumulated in 64-bit.
template <typename Real>
double sum64(const MatrixT<Real>& m) {
  double acc = 0.0;
  const Real* p = m.data();
  for (Eigen::Index i = 0, n = m.size(); i < n; ++i) acc += static_cast<double>(p[i]);
  return acc;
}

}  // namespace hsva
