#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsva/numerics/matrix.hpp"

namespace hsva {

template <typename Real>
struct Parameter {
  std::string name;
  std::string group;
  MatrixT<Real> value;
  /// Always the same shape as `value`.
  MatrixT<Real> grad;
  /// Set once a backward pass has written into `grad` since the last zero_grad.
  bool grad_ready = false;
};

/// Named parameter matrices grouped per network, each with a gradient slot.
template <typename Real>
class ParamStore {
 public:
  std::size_t add(std::string name, std::string group, MatrixT<Real> value) {
    if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    Parameter<Real> p;
    p.name = std::move(name);
    p.group = std::move(group);
    p.grad = MatrixT<Real>::Zero(value.rows(), value.cols());
    p.value = std::move(value);
    params_.push_back(std::move(p));
    return params_.size() - 1;
  }

  std::size_t size() const { return params_.size(); }
  Parameter<Real>& at(std::size_t i) { return params_.at(i); }
  const Parameter<Real>& at(std::size_t i) const { return params_.at(i); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return i;
    }
    return std::nullopt;
  }

  /// Indices of every parameter whose group is listed.
  std::vector<std::size_t> indices(std::span<const std::string> groups) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (std::find(groups.begin(), groups.end(), params_[i].group) != groups.end()) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> all_indices() const {
    std::vector<std::size_t> out(params_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }

  /// Distinct group names in first-seen order.
  std::vector<std::string> groups() const {
    std::vector<std::string> out;
    for (const auto& p : params_) {
      if (std::find(out.begin(), out.end(), p.group) == out.end()) out.push_back(p.group);
    }
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) {
      p.grad.setZero();
      p.grad_ready = false;
    }
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  /// Copy with every matrix converted to another scalar type.
  template <typename To>
  ParamStore<To> cast() const {
    ParamStore<To> out;
    for (const auto& p : params_) out.add(p.name, p.group, p.value.template cast<To>());
    return out;
  }

 private:
  std::vector<Parameter<Real>> params_;
};

}  // namespace hsva
