#include "hsva/numerics/adam.hpp"

#include <cmath>
#include <string>

namespace hsva {

template <typename Real>
AdamState<Real>::AdamState(const ParamStore<Real>& store, std::vector<std::size_t> subset, AdamConfig config)
    : subset_(std::move(subset)), config_(config) {
  if (subset_.empty()) throw ConfigError("adam: empty parameter subset");
  if (!(config_.learning_rate > 0.0)) throw ConfigError("adam: learning_rate must be > 0");
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0)) throw ConfigError("adam: beta1 must be in [0, 1)");
  if (!(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) throw ConfigError("adam: beta2 must be in [0, 1)");
  for (std::size_t idx : subset_) {
    const auto& p = store.at(idx);
    m_.push_back(MatrixT<Real>::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(MatrixT<Real>::Zero(p.value.rows(), p.value.cols()));
  }
}

template <typename Real>
void AdamState<Real>::step(ParamStore<Real>& store) {
  for (std::size_t idx : subset_) {
    const auto& p = store.at(idx);
    if (!p.grad_ready) throw NumericalError("adam step: gradient slot of '" + p.name + "' is empty");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const Real b1 = static_cast<Real>(config_.beta1);
  const Real b2 = static_cast<Real>(config_.beta2);
  const Real c1 = static_cast<Real>(1.0 / (1.0 - std::pow(config_.beta1, t)));
  const Real c2 = static_cast<Real>(1.0 / (1.0 - std::pow(config_.beta2, t)));
  const Real lr = static_cast<Real>(config_.learning_rate);
  const Real eps = static_cast<Real>(config_.epsilon);
  for (std::size_t k = 0; k < subset_.size(); ++k) {
    auto& p = store.at(subset_[k]);
    Real* w = p.value.data();
    Real* g = p.grad.data();
    Real* m = m_[k].data();
    Real* v = v_[k].data();
    const Eigen::Index n = p.value.size();
    // One fused pass; the moments are stored raw and bias-corrected on use.
    for (Eigen::Index i = 0; i < n; ++i) {
      const Real gi = g[i];
      const Real mi = b1 * m[i] + (Real(1) - b1) * gi;
      const Real vi = b2 * v[i] + (Real(1) - b2) * gi * gi;
      m[i] = mi;
      v[i] = vi;
      w[i] -= lr * (mi * c1) / (std::sqrt(vi * c2) + eps);
      g[i] = Real(0);
    }
    p.grad_ready = false;
  }
}

template class AdamState<float>;
template class AdamState<double>;

}  // namespace hsva
