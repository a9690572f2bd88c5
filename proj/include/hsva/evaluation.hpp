#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsva/data.hpp"
#include "hsva/model.hpp"

namespace hsva {

enum class Protocol { kCzsl, kGzsl };

std::string to_string(Protocol p);

struct SynthCounts {
  std::size_t unseen = 200;  // per unseen class, CZSL
  std::size_t gzsl_unseen = 400;
  std::size_t gzsl_seen = 200;
};

struct EvalConfig {
  SynthCounts counts;
  std::size_t classifier_epochs = 30;
  double classifier_lr = 1e-3;
  std::size_t classifier_batch = 128;
  /// Encode test features by their latent mean instead of one sample.
  bool use_mean = false;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Labeled latent vectors; labels are dataset class ids.
struct LatentSet {
  Matrix z;
  std::vector<std::uint32_t> labels;
};

/// CZSL: counts.unseen samples per unseen class from Ez(Ea(attributes)).
/// GZSL: counts.gzsl_unseen per unseen class as above plus counts.gzsl_seen per
/// seen class from Ez(Ex(x)), x drawn uniformly with replacement from that
/// class's training images.
LatentSet synthesize_latents(const HsvaModel<float>& model, const ZslDataset& ds, const SynthCounts& counts, Rng& rng,
                             Protocol protocol);

/// Latents of dataset rows via Ez(Ex(x)): one reparameterized sample each,
/// or the mean when `use_mean`.
Matrix encode_features(const HsvaModel<float>& model, const ZslDataset& ds, const std::vector<std::uint32_t>& rows,
                       Rng& rng, bool use_mean);

/// Single affine layer over latents; classes[k] is the dataset id of logit k.
struct SoftmaxClassifier {
  Matrix weight;  // latent_dim x n_classes
  Matrix bias;    // 1 x n_classes
  std::vector<std::uint32_t> classes;

  Matrix logits(const Matrix& z) const;
  /// Arg-max class ids (lowest index wins ties).
  std::vector<std::uint32_t> predict(const Matrix& z) const;
};

/// Adam (beta1 0.5, beta2 0.999) on mean cross-entropy over shuffled mini-batches.
SoftmaxClassifier train_softmax_classifier(const LatentSet& data, std::size_t epochs, double lr,
                                           std::size_t batch_size, Rng& rng);

/// Percent top-1 accuracy per true class present in `truth`.
std::map<std::uint32_t, double> per_class_top1(const std::vector<std::uint32_t>& truth,
                                               const std::vector<std::uint32_t>& predicted);

/// Encodes `rows` and scores `clf` on them.
std::map<std::uint32_t, double> per_class_top1(const SoftmaxClassifier& clf, const HsvaModel<float>& model,
                                               const ZslDataset& ds, const std::vector<std::uint32_t>& rows, Rng& rng,
                                               bool use_mean);

double macro_mean(const std::map<std::uint32_t, double>& per_class);

/// 2 S U / (S + U) in percent; 0 when both are 0.
double harmonic_mean(double u, double s);

struct MetricsReport {
  Protocol protocol = Protocol::kCzsl;
  double acc = 0.0;  // CZSL unseen accuracy
  double u = 0.0;
  double s = 0.0;
  double h = 0.0;
  std::map<std::uint32_t, double> per_class;
  std::uint64_t seed = 0;
  SynthCounts counts;
};

/// Fields protocol, acc, u, s, h, per_class {class_id: percent}, seed, counts;
/// percentages rounded to 2 decimals.
nlohmann::ordered_json to_json(const MetricsReport& r);

/// Scores an already trained latent classifier under either protocol.
MetricsReport score_classifier(const SoftmaxClassifier& clf, const HsvaModel<float>& model, const ZslDataset& ds,
                               Protocol protocol, const EvalConfig& cfg);

MetricsReport czsl_eval(const HsvaModel<float>& model, const ZslDataset& ds, const EvalConfig& cfg);
MetricsReport gzsl_eval(const HsvaModel<float>& model, const ZslDataset& ds, const EvalConfig& cfg);

}  // namespace hsva
