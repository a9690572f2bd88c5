#include "hsva/numerics/mlp.hpp"

#include <cmath>

#include "hsva/numerics/ops.hpp"

namespace hsva {
namespace {

std::string layer_name(const std::string& prefix, std::size_t i, const char* what) {
  return prefix + "." + std::to_string(i) + "." + what;
}

}  // namespace

template <typename Real>
Mlp build_mlp(ParamStore<Real>& store, const std::string& group, const std::string& prefix, std::size_t in_dim,
              const std::vector<LayerSpec>& layers, Rng& rng) {
  if (in_dim == 0) throw ConfigError(prefix + ": input width must be >= 1");
  if (layers.empty()) throw ConfigError(prefix + ": needs at least one layer");
  Mlp mlp;
  std::size_t in = in_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::size_t out = layers[i].out;
    if (out == 0) throw ConfigError(prefix + ": layer " + std::to_string(i) + " has zero width");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    MatrixT<Real> w(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = static_cast<Real>(rng.uniform(-limit, limit));
    MlpLayer layer;
    layer.weight = store.add(layer_name(prefix, i, "weight"), group, std::move(w));
    layer.bias = store.add(layer_name(prefix, i, "bias"), group, MatrixT<Real>::Zero(1, static_cast<Eigen::Index>(out)));
    layer.in = in;
    layer.out = out;
    layer.activation = layers[i].activation;
    mlp.layers.push_back(layer);
    in = out;
  }
  return mlp;
}

template <typename Real>
Mlp bind_mlp(const ParamStore<Real>& store, const std::string& prefix, std::size_t in_dim,
             const std::vector<LayerSpec>& layers) {
  Mlp mlp;
  std::size_t in = in_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto w = store.find(layer_name(prefix, i, "weight"));
    const auto b = store.find(layer_name(prefix, i, "bias"));
    if (!w || !b) throw DataError("missing parameter " + layer_name(prefix, i, w ? "bias" : "weight"));
    const auto out = layers[i].out;
    require_shape(store.at(*w).value, static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out),
                  layer_name(prefix, i, "weight"));
    require_shape(store.at(*b).value, 1, static_cast<Eigen::Index>(out), layer_name(prefix, i, "bias"));
    mlp.layers.push_back(MlpLayer{*w, *b, in, out, layers[i].activation});
    in = out;
  }
  return mlp;
}

template <typename Real>
Var mlp_forward(Graph<Real>& g, const ParamStore<Real>& store, const Mlp& mlp, Var input) {
  const auto& x = g.value(input);
  if (static_cast<std::size_t>(x.cols()) != mlp.in_dim()) {
    throw ShapeError("mlp_forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(mlp.in_dim()));
  }
  Var h = input;
  for (const auto& layer : mlp.layers) {
    h = ops::affine(g, h, g.parameter(store, layer.weight), g.parameter(store, layer.bias));
    if (layer.activation == Activation::kRelu) h = ops::relu(g, h);
  }
  return h;
}

template Mlp build_mlp<float>(ParamStore<float>&, const std::string&, const std::string&, std::size_t,
                              const std::vector<LayerSpec>&, Rng&);
template Mlp build_mlp<double>(ParamStore<double>&, const std::string&, const std::string&, std::size_t,
                               const std::vector<LayerSpec>&, Rng&);
template Mlp bind_mlp<float>(const ParamStore<float>&, const std::string&, std::size_t, const std::vector<LayerSpec>&);
template Mlp bind_mlp<double>(const ParamStore<double>&, const std::string&, std::size_t,
                              const std::vector<LayerSpec>&);
template Var mlp_forward<float>(Graph<float>&, const ParamStore<float>&, const Mlp&, Var);
template Var mlp_forward<double>(Graph<double>&, const ParamStore<double>&, const Mlp&, Var);

}  // namespace hsva
