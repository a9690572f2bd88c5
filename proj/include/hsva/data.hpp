#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hsva/numerics/matrix.hpp"
#include "hsva/numerics/rng.hpp"

namespace hsva {

/// Features, class attributes, labels and the zero-shot splits.
///
/// Invariants (checked by validate()):
///  - seen and unseen classes are disjoint and together cover every label;
///  - train and test_seen samples carry seen labels, test_unseen samples
///    carry unseen labels;
///  - train is disjoint from both test splits; no index is repeated.
struct ZslDataset {
  Matrix features;    // n_samples x visual_dim
  Matrix attributes;  // n_classes x attr_dim
  std::vector<std::uint32_t> labels;
  std::vector<std::uint32_t> seen_classes;
  std::vector<std::uint32_t> unseen_classes;
  std::vector<std::uint32_t> train_idx;
  std::vector<std::uint32_t> test_seen_idx;
  std::vector<std::uint32_t> test_unseen_idx;

  std::size_t n_samples() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t n_classes() const { return static_cast<std::size_t>(attributes.rows()); }
  std::size_t visual_dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t attr_dim() const { return static_cast<std::size_t>(attributes.cols()); }

  /// Position of `cls` in seen_classes; throws if it is not a seen class.
  std::uint32_t seen_position(std::uint32_t cls) const;

  void validate() const;
  /// Bitwise equality of every field.
  bool operator==(const ZslDataset& other) const;
};

/// Directory container: meta.json, features.bin, attributes.bin, labels.bin.
ZslDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const ZslDataset& ds, const std::filesystem::path& dir);

/// Per-dimension min-max scaling of features to [0, 1], fitted on train_idx.
void minmax_normalize_features(ZslDataset& ds);

enum class SynthMap { kTanh, kSoftplus, kRelu, kSigmoid };

SynthMap synth_map_from_string(const std::string& name);
std::string to_string(SynthMap map);

/// Synthetic heterogeneous two-view benchmark.
///
/// One latent prototype per class; visual features are
/// visual_map(W_v^T (prototype + feature_noise * eps) + b_v), class attributes
/// are semantic_map(W_a^T prototype + b_a) (+ attribute_noise * eps, fixed
/// per class). The two views differ in dimension and in map family.
struct SynthConfig {
  std::size_t n_classes = 20;
  std::size_t n_seen = 15;
  std::size_t n_unseen = 5;
  std::size_t samples_per_class = 100;
  std::size_t visual_dim = 256;
  std::size_t attr_dim = 32;
  std::size_t prototype_dim = 8;
  double prototype_scale = 1.0;
  double feature_noise = 1.0;
  double attribute_noise = 0.0;
  double train_fraction = 0.8;
  SynthMap visual_map = SynthMap::kTanh;
  SynthMap semantic_map = SynthMap::kSoftplus;
  std::uint64_t seed = 2021;

  void validate() const;
};

ZslDataset synth_generate(const SynthConfig& cfg);

/// One training mini-batch.
template <typename Real>
struct BatchT {
  MatrixT<Real> x;                        // seen visual features
  MatrixT<Real> a;                        // attributes of each row's class
  std::vector<std::uint32_t> labels;      // position within seen_classes
  std::vector<std::uint32_t> sample_ids;  // dataset rows
  MatrixT<Real> unseen_attributes;        // attributes of sampled unseen classes
  std::vector<std::uint32_t> unseen_ids;  // classes of those rows

  std::size_t size() const { return labels.size(); }

  template <typename To>
  BatchT<To> cast() const {
    return {x.template cast<To>(), a.template cast<To>(), labels, sample_ids, unseen_attributes.template cast<To>(),
            unseen_ids};
  }
};
using Batch = BatchT<float>;

/// Shuffled mini-batches covering train_idx exactly once (last batch may be
/// short). Each batch carries the full unseen attribute block when there are
/// at most `max_unseen` unseen classes, otherwise `max_unseen` classes drawn
/// without replacement per batch.
std::vector<Batch> batch_iter(const ZslDataset& ds, std::size_t batch_size, Rng& rng, std::size_t max_unseen = 64);

/// Rows of `m` selected by `idx`.
Matrix gather_rows(const Matrix& m, const std::vector<std::uint32_t>& idx);

}  // namespace hsva
