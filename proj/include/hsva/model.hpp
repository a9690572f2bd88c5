#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsva/losses.hpp"
#include "hsva/numerics/mlp.hpp"
#include "hsva/numerics/rng.hpp"

namespace hsva {

/// Parameter-group names. Every model parameter belongs to exactly one.
namespace groups {
inline const std::string kVisualEncoder = "Ex";
inline const std::string kSemanticEncoder = "Ea";
inline const std::string kCommonEncoder = "Ez";
inline const std::string kVisualDecoder = "Dx";
inline const std::string kSemanticDecoder = "Da";
inline const std::string kClassifier1 = "Cls1";
inline const std::string kClassifier2 = "Cls2";

inline const std::vector<std::string> kAll = {kVisualEncoder, kSemanticEncoder, kCommonEncoder, kVisualDecoder,
                                              kSemanticDecoder, kClassifier1,   kClassifier2};
inline const std::vector<std::string> kTaskEncoders = {kVisualEncoder, kSemanticEncoder};
inline const std::vector<std::string> kClassifiers = {kClassifier1, kClassifier2};
}  // namespace groups

/// Layer widths of the seven networks.
///
/// Ex: visual_dim -> visual_hidden... -> structure_dim (ReLU)
/// Ea: attr_dim -> semantic_hidden... -> structure_dim (ReLU)
/// Ez: structure_dim -> common_hidden... (ReLU) -> {mu, log-variance} heads of latent_dim
/// Dx: latent_dim -> visual_decoder_hidden... (ReLU) -> visual_dim
/// Da: latent_dim -> semantic_decoder_hidden... (ReLU) -> attr_dim
/// Cls1, Cls2: structure_dim -> classifier_hidden... (ReLU) -> n_seen_classes logits
struct Architecture {
  std::size_t visual_dim = 0;
  std::size_t attr_dim = 0;
  std::size_t n_seen_classes = 0;
  std::size_t structure_dim = 2048;
  std::size_t latent_dim = 64;
  std::vector<std::size_t> visual_hidden;
  std::vector<std::size_t> semantic_hidden;
  std::vector<std::size_t> common_hidden{1560};
  std::vector<std::size_t> visual_decoder_hidden{1660};
  std::vector<std::size_t> semantic_decoder_hidden{660};
  std::vector<std::size_t> classifier_hidden;

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

nlohmann::ordered_json architecture_to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

enum class ClassifierId { kFirst, kSecond };

/// One reparameterized draw z = mu + sqrt(var) * noise.
template <typename Real>
struct LatentSample {
  MatrixT<Real> z;
  GaussianParams<Real> gaussian;
  MatrixT<Real> noise;
};

/// z = mu + exp(logvar / 2) * noise on a graph; the gradient reaches mu and
/// logvar, never the noise.
template <typename Real>
Var reparameterize(Graph<Real>& g, GaussianVars gauss, const MatrixT<Real>& noise);

template <typename Real>
LatentSample<Real> reparameterize(const GaussianParams<Real>& gauss, Rng& rng);

/// The two partially-aligned VAEs plus the two structure-space classifiers.
template <typename Real>
class HsvaModel {
 public:
  /// Fresh Glorot-initialized model.
  HsvaModel(const Architecture& arch, Rng& rng);
  /// Binds to existing parameters (checkpoint load); validates names, groups and shapes.
  HsvaModel(const Architecture& arch, ParamStore<Real> params);

  HsvaModel(const HsvaModel&) = default;
  HsvaModel& operator=(const HsvaModel&) = default;
  HsvaModel(HsvaModel&&) noexcept = default;
  HsvaModel& operator=(HsvaModel&&) noexcept = default;

  const Architecture& architecture() const { return arch_; }
  ParamStore<Real>& params() { return params_; }
  const ParamStore<Real>& params() const { return params_; }

  Var encode_visual(Graph<Real>& g, Var x) const;
  Var encode_semantic(Graph<Real>& g, Var a) const;
  GaussianVars encode_common(Graph<Real>& g, Var s) const;
  Var decode_visual(Graph<Real>& g, Var z) const;
  Var decode_semantic(Graph<Real>& g, Var z) const;
  Var classify(Graph<Real>& g, ClassifierId which, Var s) const;

  MatrixT<Real> encode_visual(const MatrixT<Real>& x) const;
  MatrixT<Real> encode_semantic(const MatrixT<Real>& a) const;
  GaussianParams<Real> encode_common(const MatrixT<Real>& s) const;
  MatrixT<Real> decode_visual(const MatrixT<Real>& z) const;
  MatrixT<Real> decode_semantic(const MatrixT<Real>& z) const;
  MatrixT<Real> classify(ClassifierId which, const MatrixT<Real>& s) const;

  /// Copies the first classifier into the second.
  void copy_classifier_1_to_2();

  /// Same weights in another precision.
  template <typename To>
  HsvaModel<To> cast() const {
    return HsvaModel<To>(arch_, params_.template cast<To>());
  }

  const Mlp& network(const std::string& group) const;

 private:
  void bind();

  Architecture arch_;
  ParamStore<Real> params_;
  Mlp visual_encoder_;
  Mlp semantic_encoder_;
  Mlp common_trunk_;
  Mlp mu_head_;
  Mlp logvar_head_;
  Mlp visual_decoder_;
  Mlp semantic_decoder_;
  Mlp classifier1_;
  Mlp classifier2_;
};

extern template class HsvaModel<float>;
extern template class HsvaModel<double>;

/// Single-file checkpoint: magic "HSVACKPT", u32 format version, u64 manifest
/// length, UTF-8 JSON manifest (architecture + ordered list of parameter
/// names/groups/shapes), then every parameter as little-endian float32,
/// row-major, in manifest order.
void save_checkpoint(const HsvaModel<float>& model, const std::filesystem::path& path);
HsvaModel<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace hsva
