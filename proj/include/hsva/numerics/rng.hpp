#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "hsva/numerics/matrix.hpp"

namespace hsva {

/// Seeded pseudo-random source.
///
/// The engine is std::mt19937_64. Child streams are derived with split(),
/// which mixes (seed, stream id) through SplitMix64, so independent consumers
/// (model init, batch order, noise, evaluation) never share state and adding
/// draws to one consumer does not perturb the others. Identical seed plus
/// identical call sequence gives identical output for a given standard
/// library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  /// Independent generator for a named sub-stream.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), engine_);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

/// rows x cols matrix of i.i.d. N(0, 1) entries.
template <typename Real>
MatrixT<Real> sample_standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  MatrixT<Real> out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = static_cast<Real>(rng.normal());
  return out;
}

/// `count` directions drawn uniformly from the unit sphere in R^dim (one per
/// row), by normalizing standard-normal vectors.
template <typename Real>
MatrixT<Real> sample_unit_sphere(Rng& rng, Eigen::Index count, Eigen::Index dim) {
  if (dim < 1) throw ShapeError("sample_unit_sphere: dimension must be >= 1, got " + std::to_string(dim));
  MatrixT<Real> out(count, dim);
  for (Eigen::Index m = 0; m < count; ++m) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& x : v) {
        x = rng.normal();
        norm2 += x * x;
      }
    } while (norm2 < 1e-300);
    const double inv = 1.0 / std::sqrt(norm2);
    for (Eigen::Index j = 0; j < dim; ++j) out(m, j) = static_cast<Real>(v[static_cast<std::size_t>(j)] * inv);
  }
  return out;
}

}  // namespace hsva
