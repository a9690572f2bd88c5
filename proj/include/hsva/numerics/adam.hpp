#pragma once

#include <cstdint>
#include <vector>

#include "hsva/numerics/param_store.hpp"

namespace hsva {

struct AdamConfig {
  double learning_rate = 1.5e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed subset of a ParamStore.
template <typename Real>
class AdamState {
 public:
  AdamState(const ParamStore<Real>& store, std::vector<std::size_t> subset, AdamConfig config);

  /// One update of every parameter in the subset, then zeroes their
  /// gradient slots. Every parameter of the subset must have received a
  /// gradient since the previous step.
  void step(ParamStore<Real>& store);

  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::size_t>& subset() const { return subset_; }
  const MatrixT<Real>& first_moment(std::size_t k) const { return m_.at(k); }
  const MatrixT<Real>& second_moment(std::size_t k) const { return v_.at(k); }

 private:
  std::vector<std::size_t> subset_;
  AdamConfig config_;
  std::vector<MatrixT<Real>> m_;
  std::vector<MatrixT<Real>> v_;
  std::uint64_t steps_ = 0;
};

extern template class AdamState<float>;
extern template class AdamState<double>;

}  // namespace hsva
