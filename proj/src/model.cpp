#include "hsva/model.hpp"

#include <algorithm>

#include "hsva/numerics/ops.hpp"

namespace hsva {
namespace {

std::vector<LayerSpec> hidden_then(const std::vector<std::size_t>& hidden, std::size_t out, Activation last) {
  std::vector<LayerSpec> layers;
  for (auto w : hidden) layers.push_back({w, Activation::kRelu});
  layers.push_back({out, last});
  return layers;
}

std::vector<LayerSpec> hidden_only(const std::vector<std::size_t>& hidden) {
  std::vector<LayerSpec> layers;
  for (auto w : hidden) layers.push_back({w, Activation::kRelu});
  return layers;
}

std::size_t last_width(const std::vector<std::size_t>& hidden, std::size_t fallback) {
  return hidden.empty() ? fallback : hidden.back();
}

struct NetLayout {
  std::string group;
  std::string prefix;
  std::size_t in;
  std::vector<LayerSpec> layers;
};

// Fixed construction order; initialization consumes the Rng in this order.
std::vector<NetLayout> layouts(const Architecture& a) {
  const std::size_t trunk_out = last_width(a.common_hidden, a.structure_dim);
  std::vector<NetLayout> out;
  out.push_back({groups::kVisualEncoder, "Ex", a.visual_dim,
                 hidden_then(a.visual_hidden, a.structure_dim, Activation::kRelu)});
  out.push_back({groups::kSemanticEncoder, "Ea", a.attr_dim,
                 hidden_then(a.semantic_hidden, a.structure_dim, Activation::kRelu)});
  out.push_back({groups::kCommonEncoder, "Ez.trunk", a.structure_dim, hidden_only(a.common_hidden)});
  out.push_back({groups::kCommonEncoder, "Ez.mu", trunk_out, {{a.latent_dim, Activation::kIdentity}}});
  out.push_back({groups::kCommonEncoder, "Ez.logvar", trunk_out, {{a.latent_dim, Activation::kIdentity}}});
  out.push_back({groups::kVisualDecoder, "Dx", a.latent_dim,
                 hidden_then(a.visual_decoder_hidden, a.visual_dim, Activation::kIdentity)});
  out.push_back({groups::kSemanticDecoder, "Da", a.latent_dim,
                 hidden_then(a.semantic_decoder_hidden, a.attr_dim, Activation::kIdentity)});
  out.push_back({groups::kClassifier1, "Cls1", a.structure_dim,
                 hidden_then(a.classifier_hidden, a.n_seen_classes, Activation::kIdentity)});
  out.push_back({groups::kClassifier2, "Cls2", a.structure_dim,
                 hidden_then(a.classifier_hidden, a.n_seen_classes, Activation::kIdentity)});
  return out;
}

nlohmann::json widths(const std::vector<std::size_t>& v) { return nlohmann::json(v); }

std::vector<std::size_t> read_widths(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  std::vector<std::size_t> out;
  for (const auto& w : j.at(key)) out.push_back(w.get<std::size_t>());
  return out;
}

template <typename Real>
Var trunk_or_identity(Graph<Real>& g, const ParamStore<Real>& store, const Mlp& trunk, Var s) {
  return trunk.layers.empty() ? s : mlp_forward(g, store, trunk, s);
}

}  // namespace

void Architecture::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("architecture.") + name + " must be >= 1");
  };
  positive(visual_dim, "visual_dim");
  positive(attr_dim, "attr_dim");
  positive(n_seen_classes, "n_seen_classes");
  positive(structure_dim, "structure_dim");
  positive(latent_dim, "latent_dim");
  for (const auto* list : {&visual_hidden, &semantic_hidden, &common_hidden, &visual_decoder_hidden,
                           &semantic_decoder_hidden, &classifier_hidden}) {
    if (std::find(list->begin(), list->end(), std::size_t{0}) != list->end()) {
      throw ConfigError("architecture: hidden layer widths must be >= 1");
    }
  }
}

nlohmann::ordered_json architecture_to_json(const Architecture& a) {
  nlohmann::ordered_json j;
  j["visual_dim"] = a.visual_dim;
  j["attr_dim"] = a.attr_dim;
  j["n_seen_classes"] = a.n_seen_classes;
  j["structure_dim"] = a.structure_dim;
  j["latent_dim"] = a.latent_dim;
  j["visual_hidden"] = widths(a.visual_hidden);
  j["semantic_hidden"] = widths(a.semantic_hidden);
  j["common_hidden"] = widths(a.common_hidden);
  j["visual_decoder_hidden"] = widths(a.visual_decoder_hidden);
  j["semantic_decoder_hidden"] = widths(a.semantic_decoder_hidden);
  j["classifier_hidden"] = widths(a.classifier_hidden);
  return j;
}

Architecture architecture_from_json(const nlohmann::json& j) {
  Architecture a;
  try {
    a.visual_dim = j.at("visual_dim").get<std::size_t>();
    a.attr_dim = j.at("attr_dim").get<std::size_t>();
    a.n_seen_classes = j.at("n_seen_classes").get<std::size_t>();
    a.structure_dim = j.at("structure_dim").get<std::size_t>();
    a.latent_dim = j.at("latent_dim").get<std::size_t>();
    a.visual_hidden = read_widths(j, "visual_hidden");
    a.semantic_hidden = read_widths(j, "semantic_hidden");
    a.common_hidden = read_widths(j, "common_hidden");
    a.visual_decoder_hidden = read_widths(j, "visual_decoder_hidden");
    a.semantic_decoder_hidden = read_widths(j, "semantic_decoder_hidden");
    a.classifier_hidden = read_widths(j, "classifier_hidden");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("architecture: ") + e.what());
  }
  a.validate();
  return a;
}

template <typename Real>
Var reparameterize(Graph<Real>& g, GaussianVars gauss, const MatrixT<Real>& noise) {
  const auto& mu = g.value(gauss.mu);
  if (noise.rows() != mu.rows() || noise.cols() != mu.cols()) {
    throw ShapeError("reparameterize: noise " + shape_string(noise) + " vs mean " + shape_string(mu));
  }
  Var sd = ops::exp(g, ops::scale(g, gauss.logvar, 0.5));
  return ops::add(g, gauss.mu, ops::mul(g, sd, g.constant(noise, "reparameterization noise")));
}

template <typename Real>
LatentSample<Real> reparameterize(const GaussianParams<Real>& gauss, Rng& rng) {
  LatentSample<Real> out;
  out.noise = sample_standard_normal<Real>(rng, gauss.mu.rows(), gauss.mu.cols());
  out.z = gauss.mu + ((gauss.logvar.array() * Real(0.5)).exp() * out.noise.array()).matrix();
  out.gaussian = gauss;
  return out;
}

template <typename Real>
HsvaModel<Real>::HsvaModel(const Architecture& arch, Rng& rng) : arch_(arch) {
  arch_.validate();
  for (const auto& net : layouts(arch_)) {
    if (!net.layers.empty()) build_mlp(params_, net.group, net.prefix, net.in, net.layers, rng);
  }
  bind();
}

template <typename Real>
HsvaModel<Real>::HsvaModel(const Architecture& arch, ParamStore<Real> params) : arch_(arch), params_(std::move(params)) {
  arch_.validate();
  bind();
  for (const auto& p : params_) {
    if (std::find(groups::kAll.begin(), groups::kAll.end(), p.group) == groups::kAll.end()) {
      throw DataError("parameter '" + p.name + "' has unknown group '" + p.group + "'");
    }
  }
}

template <typename Real>
void HsvaModel<Real>::bind() {
  std::size_t expected = 0;
  std::vector<Mlp*> targets = {&visual_encoder_, &semantic_encoder_, &common_trunk_, &mu_head_, &logvar_head_,
                               &visual_decoder_, &semantic_decoder_, &classifier1_,   &classifier2_};
  const auto nets = layouts(arch_);
  for (std::size_t i = 0; i < nets.size(); ++i) {
    *targets[i] = bind_mlp(params_, nets[i].prefix, nets[i].in, nets[i].layers);
    for (const auto& layer : targets[i]->layers) {
      for (auto idx : {layer.weight, layer.bias}) {
        if (params_.at(idx).group != nets[i].group) {
          throw DataError("parameter '" + params_.at(idx).name + "' is in group '" + params_.at(idx).group +
                          "', expected '" + nets[i].group + "'");
        }
      }
    }
    expected += 2 * nets[i].layers.size();
  }
  if (expected != params_.size()) {
    throw DataError("model has " + std::to_string(params_.size()) + " parameters, architecture needs " +
                    std::to_string(expected));
  }
}

template <typename Real>
const Mlp& HsvaModel<Real>::network(const std::string& group) const {
  if (group == groups::kVisualEncoder) return visual_encoder_;
  if (group == groups::kSemanticEncoder) return semantic_encoder_;
  if (group == groups::kVisualDecoder) return visual_decoder_;
  if (group == groups::kSemanticDecoder) return semantic_decoder_;
  if (group == groups::kClassifier1) return classifier1_;
  if (group == groups::kClassifier2) return classifier2_;
  throw ConfigError("network(): no single MLP for group '" + group + "'");
}

template <typename Real>
Var HsvaModel<Real>::encode_visual(Graph<Real>& g, Var x) const {
  return mlp_forward(g, params_, visual_encoder_, x);
}

template <typename Real>
Var HsvaModel<Real>::encode_semantic(Graph<Real>& g, Var a) const {
  return mlp_forward(g, params_, semantic_encoder_, a);
}

template <typename Real>
GaussianVars HsvaModel<Real>::encode_common(Graph<Real>& g, Var s) const {
  if (static_cast<std::size_t>(g.value(s).cols()) != arch_.structure_dim) {
    throw ShapeError("encode_common: input has " + std::to_string(g.value(s).cols()) + " columns, expected " +
                     std::to_string(arch_.structure_dim));
  }
  Var h = trunk_or_identity(g, params_, common_trunk_, s);
  return {mlp_forward(g, params_, mu_head_, h), mlp_forward(g, params_, logvar_head_, h)};
}

template <typename Real>
Var HsvaModel<Real>::decode_visual(Graph<Real>& g, Var z) const {
  return mlp_forward(g, params_, visual_decoder_, z);
}

template <typename Real>
Var HsvaModel<Real>::decode_semantic(Graph<Real>& g, Var z) const {
  return mlp_forward(g, params_, semantic_decoder_, z);
}

template <typename Real>
Var HsvaModel<Real>::classify(Graph<Real>& g, ClassifierId which, Var s) const {
  return mlp_forward(g, params_, which == ClassifierId::kFirst ? classifier1_ : classifier2_, s);
}

template <typename Real>
MatrixT<Real> HsvaModel<Real>::encode_visual(const MatrixT<Real>& x) const {
  Graph<Real> g;
  return g.value(encode_visual(g, g.constant(x, "visual features")));
}

template <typename Real>
MatrixT<Real> HsvaModel<Real>::encode_semantic(const MatrixT<Real>& a) const {
  Graph<Real> g;
  return g.value(encode_semantic(g, g.constant(a, "attributes")));
}

template <typename Real>
GaussianParams<Real> HsvaModel<Real>::encode_common(const MatrixT<Real>& s) const {
  Graph<Real> g;
  auto gv = encode_common(g, g.constant(s, "structure embedding"));
  return {g.value(gv.mu), g.value(gv.logvar)};
}

template <typename Real>
MatrixT<Real> HsvaModel<Real>::decode_visual(const MatrixT<Real>& z) const {
  Graph<Real> g;
  return g.value(decode_visual(g, g.constant(z, "latent")));
}

template <typename Real>
MatrixT<Real> HsvaModel<Real>::decode_semantic(const MatrixT<Real>& z) const {
  Graph<Real> g;
  return g.value(decode_semantic(g, g.constant(z, "latent")));
}

template <typename Real>
MatrixT<Real> HsvaModel<Real>::classify(ClassifierId which, const MatrixT<Real>& s) const {
  Graph<Real> g;
  return g.value(classify(g, which, g.constant(s, "structure embedding")));
}

template <typename Real>
void HsvaModel<Real>::copy_classifier_1_to_2() {
  for (std::size_t i = 0; i < classifier1_.layers.size(); ++i) {
    params_.at(classifier2_.layers[i].weight).value = params_.at(classifier1_.layers[i].weight).value;
    params_.at(classifier2_.layers[i].bias).value = params_.at(classifier1_.layers[i].bias).value;
  }
}

template class HsvaModel<float>;
template class HsvaModel<double>;
template Var reparameterize<float>(Graph<float>&, GaussianVars, const MatrixT<float>&);
template Var reparameterize<double>(Graph<double>&, GaussianVars, const MatrixT<double>&);
template LatentSample<float> reparameterize<float>(const GaussianParams<float>&, Rng&);
template LatentSample<double> reparameterize<double>(const GaussianParams<double>&, Rng&);

}  // namespace hsva
