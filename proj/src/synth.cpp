#include <algorithm>
#include <cmath>
#include <numeric>

#include "hsva/data.hpp"

namespace hsva {
namespace {

double apply_map(SynthMap map, double v) {
  switch (map) {
    case SynthMap::kTanh:
      return std::tanh(v);
    case SynthMap::kSoftplus:
      return v > 30.0 ? v : std::log1p(std::exp(v));
    case SynthMap::kRelu:
      return v > 0.0 ? v : 0.0;
    case SynthMap::kSigmoid:
      return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

MatrixD gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  MatrixD m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

}  // namespace

SynthMap synth_map_from_string(const std::string& name) {
  if (name == "tanh") return SynthMap::kTanh;
  if (name == "softplus") return SynthMap::kSoftplus;
  if (name == "relu") return SynthMap::kRelu;
  if (name == "sigmoid") return SynthMap::kSigmoid;
  throw ConfigError("unknown synthetic map '" + name + "' (expected tanh, softplus, relu or sigmoid)");
}

std::string to_string(SynthMap map) {
  switch (map) {
    case SynthMap::kTanh:
      return "tanh";
    case SynthMap::kSoftplus:
      return "softplus";
    case SynthMap::kRelu:
      return "relu";
    case SynthMap::kSigmoid:
      return "sigmoid";
  }
  return "?";
}

void SynthConfig::validate() const {
  if (n_seen + n_unseen != n_classes) {
    throw ConfigError("synth: n_seen (" + std::to_string(n_seen) + ") + n_unseen (" + std::to_string(n_unseen) +
                      ") must equal n_classes (" + std::to_string(n_classes) + ")");
  }
  if (n_seen < 1) throw ConfigError("synth.n_seen must be >= 1");
  if (n_unseen < 1) throw ConfigError("synth.n_unseen must be >= 1");
  if (samples_per_class < 2) throw ConfigError("synth.samples_per_class must be >= 2");
  if (visual_dim < 1) throw ConfigError("synth.visual_dim must be >= 1");
  if (attr_dim < 1) throw ConfigError("synth.attr_dim must be >= 1");
  if (prototype_dim < 1) throw ConfigError("synth.prototype_dim must be >= 1");
  if (!(prototype_scale > 0.0)) throw ConfigError("synth.prototype_scale must be > 0");
  if (!(feature_noise >= 0.0)) throw ConfigError("synth.feature_noise must be >= 0");
  if (!(attribute_noise >= 0.0)) throw ConfigError("synth.attribute_noise must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("synth.train_fraction must be in (0, 1)");
}

ZslDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(cfg.prototype_dim));

  const MatrixD prototypes = gaussian_matrix(rng, cfg.n_classes, cfg.prototype_dim, cfg.prototype_scale);
  const MatrixD w_visual = gaussian_matrix(rng, cfg.prototype_dim, cfg.visual_dim, inv_sqrt_p);
  const MatrixD b_visual = gaussian_matrix(rng, 1, cfg.visual_dim, 0.25);
  const MatrixD w_semantic = gaussian_matrix(rng, cfg.prototype_dim, cfg.attr_dim, inv_sqrt_p);
  const MatrixD b_semantic = gaussian_matrix(rng, 1, cfg.attr_dim, 0.25);

  ZslDataset ds;
  MatrixD attr = prototypes * w_semantic;
  attr.rowwise() += b_semantic.row(0);
  attr = attr.unaryExpr([&](double v) { return apply_map(cfg.semantic_map, v); });
  if (cfg.attribute_noise > 0.0) attr += gaussian_matrix(rng, cfg.n_classes, cfg.attr_dim, cfg.attribute_noise);
  ds.attributes = attr.cast<float>();

  std::vector<std::uint32_t> classes(cfg.n_classes);
  std::iota(classes.begin(), classes.end(), 0u);
  rng.shuffle(classes);
  ds.seen_classes.assign(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(cfg.n_seen));
  ds.unseen_classes.assign(classes.begin() + static_cast<std::ptrdiff_t>(cfg.n_seen), classes.end());
  std::sort(ds.seen_classes.begin(), ds.seen_classes.end());
  std::sort(ds.unseen_classes.begin(), ds.unseen_classes.end());

  const std::size_t n = cfg.n_classes * cfg.samples_per_class;
  MatrixD latent(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.prototype_dim));
  ds.labels.resize(n);
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
      const auto row = static_cast<Eigen::Index>(c * cfg.samples_per_class + s);
      ds.labels[static_cast<std::size_t>(row)] = static_cast<std::uint32_t>(c);
      for (std::size_t j = 0; j < cfg.prototype_dim; ++j) {
        latent(row, static_cast<Eigen::Index>(j)) =
            prototypes(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) + cfg.feature_noise * rng.normal();
      }
    }
  }
  MatrixD features = latent * w_visual;
  features.rowwise() += b_visual.row(0);
  features = features.unaryExpr([&](double v) { return apply_map(cfg.visual_map, v); });
  ds.features = features.cast<float>();

  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(cfg.samples_per_class))), 1,
      cfg.samples_per_class - 1);
  for (auto c : ds.seen_classes) {
    std::vector<std::uint32_t> members(cfg.samples_per_class);
    std::iota(members.begin(), members.end(), static_cast<std::uint32_t>(c * cfg.samples_per_class));
    rng.shuffle(members);
    ds.train_idx.insert(ds.train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.test_seen_idx.insert(ds.test_seen_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                            members.end());
  }
  for (auto c : ds.unseen_classes) {
    for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
      ds.test_unseen_idx.push_back(static_cast<std::uint32_t>(c * cfg.samples_per_class + s));
    }
  }
  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.test_seen_idx.begin(), ds.test_seen_idx.end());
  ds.validate();
  return ds;
}

}  // namespace hsva
