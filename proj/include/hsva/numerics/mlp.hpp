#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hsva/numerics/graph.hpp"
#include "hsva/numerics/rng.hpp"

namespace hsva {

enum class Activation { kIdentity, kRelu };

struct LayerSpec {
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;
};

struct MlpLayer {
  std::size_t weight = 0;  // index into the ParamStore, shape in x out
  std::size_t bias = 0;    // 1 x out
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;
};

/// Stack of affine layers, each followed by its activation.
struct Mlp {
  std::vector<MlpLayer> layers;

  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out; }
};

/// Adds the layers' parameters to `store` under `group`, named
/// "<prefix>.<layer>.weight" / ".bias". Weights are Glorot-uniform in
/// +-sqrt(6 / (fan_in + fan_out)), biases zero.
template <typename Real>
Mlp build_mlp(ParamStore<Real>& store, const std::string& group, const std::string& prefix, std::size_t in_dim,
              const std::vector<LayerSpec>& layers, Rng& rng);

/// Rebinds an MLP to parameters already present in `store` (checkpoint load).
template <typename Real>
Mlp bind_mlp(const ParamStore<Real>& store, const std::string& prefix, std::size_t in_dim,
             const std::vector<LayerSpec>& layers);

template <typename Real>
Var mlp_forward(Graph<Real>& g, const ParamStore<Real>& store, const Mlp& mlp, Var input);

}  // namespace hsva
