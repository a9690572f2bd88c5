#include "hsva/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hsva/numerics/adam.hpp"
#include "hsva/numerics/ops.hpp"

namespace hsva {
namespace {

constexpr Eigen::Index kEncodeChunk = 512;

// Rng streams of one evaluation run.
enum Stream : std::uint64_t { kSynthesis = 1, kClassifier = 2, kTestEncoding = 3 };

double round2(double v) { return std::round(v * 100.0) / 100.0; }

Matrix latents_of(const HsvaModel<float>& model, const Matrix& structure, Rng& rng, bool use_mean) {
  GaussianParams<float> gauss = model.encode_common(structure);
  if (use_mean) return gauss.mu;
  return reparameterize(gauss, rng).z;
}

void append_rows(Matrix& dst, Eigen::Index& at, const Matrix& src) {
  dst.middleRows(at, src.rows()) = src;
  at += src.rows();
}

}  // namespace

std::string to_string(Protocol p) { return p == Protocol::kCzsl ? "CZSL" : "GZSL"; }

void EvalConfig::validate() const {
  if (counts.unseen < 1) throw ConfigError("eval.counts.unseen must be >= 1");
  if (counts.gzsl_unseen < 1) throw ConfigError("eval.counts.gzsl_unseen must be >= 1");
  if (counts.gzsl_seen < 1) throw ConfigError("eval.counts.gzsl_seen must be >= 1");
  if (classifier_epochs < 1) throw ConfigError("eval.classifier_epochs must be >= 1");
  if (!(classifier_lr > 0.0)) throw ConfigError("eval.classifier_lr must be > 0");
  if (classifier_batch < 1) throw ConfigError("eval.classifier_batch must be >= 1");
}

LatentSet synthesize_latents(const HsvaModel<float>& model, const ZslDataset& ds, const SynthCounts& counts, Rng& rng,
                             Protocol protocol) {
  const std::size_t per_unseen = protocol == Protocol::kCzsl ? counts.unseen : counts.gzsl_unseen;
  if (per_unseen == 0) throw ConfigError("synthesized count per unseen class must be >= 1");
  if (protocol == Protocol::kGzsl && counts.gzsl_seen == 0) {
    throw ConfigError("synthesized count per seen class must be >= 1");
  }

  std::vector<std::vector<std::uint32_t>> train_by_seen;
  std::size_t total = per_unseen * ds.unseen_classes.size();
  if (protocol == Protocol::kGzsl) {
    train_by_seen.resize(ds.seen_classes.size());
    for (auto i : ds.train_idx) train_by_seen[ds.seen_position(ds.labels[i])].push_back(i);
    for (std::size_t k = 0; k < train_by_seen.size(); ++k) {
      if (train_by_seen[k].empty()) {
        throw DataError("seen class " + std::to_string(ds.seen_classes[k]) + " has no training images");
      }
    }
    total += counts.gzsl_seen * ds.seen_classes.size();
  }

  LatentSet out;
  out.z.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(model.architecture().latent_dim));
  out.labels.reserve(total);
  Eigen::Index at = 0;

  for (auto c : ds.unseen_classes) {
    const Matrix a = ds.attributes.row(c).replicate(static_cast<Eigen::Index>(per_unseen), 1);
    append_rows(out.z, at, latents_of(model, model.encode_semantic(a), rng, false));
    out.labels.insert(out.labels.end(), per_unseen, c);
  }
  if (protocol == Protocol::kGzsl) {
    for (std::size_t k = 0; k < ds.seen_classes.size(); ++k) {
      std::vector<std::uint32_t> rows(counts.gzsl_seen);
      for (auto& r : rows) r = train_by_seen[k][rng.below(train_by_seen[k].size())];
      const Matrix x = gather_rows(ds.features, rows);
      append_rows(out.z, at, latents_of(model, model.encode_visual(x), rng, false));
      out.labels.insert(out.labels.end(), counts.gzsl_seen, ds.seen_classes[k]);
    }
  }
  return out;
}

Matrix encode_features(const HsvaModel<float>& model, const ZslDataset& ds, const std::vector<std::uint32_t>& rows,
                       Rng& rng, bool use_mean) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(model.architecture().latent_dim));
  Eigen::Index at = 0;
  for (std::size_t begin = 0; begin < rows.size(); begin += kEncodeChunk) {
    const std::size_t end = std::min(rows.size(), begin + static_cast<std::size_t>(kEncodeChunk));
    const std::vector<std::uint32_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                           rows.begin() + static_cast<std::ptrdiff_t>(end));
    append_rows(out, at, latents_of(model, model.encode_visual(gather_rows(ds.features, chunk)), rng, use_mean));
  }
  return out;
}

Matrix SoftmaxClassifier::logits(const Matrix& z) const {
  if (z.cols() != weight.rows()) {
    throw ShapeError("latent classifier expects " + std::to_string(weight.rows()) + " latent dims, got " +
                     std::to_string(z.cols()));
  }
  Matrix out = z * weight;
  out.rowwise() += bias.row(0);
  return out;
}

std::vector<std::uint32_t> SoftmaxClassifier::predict(const Matrix& z) const {
  const Matrix l = logits(z);
  std::vector<std::uint32_t> out(static_cast<std::size_t>(l.rows()));
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    Eigen::Index best = 0;
    l.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(best)];
  }
  return out;
}

SoftmaxClassifier train_softmax_classifier(const LatentSet& data, std::size_t epochs, double lr,
                                           std::size_t batch_size, Rng& rng) {
  if (data.labels.empty() || data.z.rows() == 0) throw DataError("latent classifier: empty training set");
  if (static_cast<std::size_t>(data.z.rows()) != data.labels.size()) {
    throw ShapeError("latent classifier: " + std::to_string(data.z.rows()) + " latents vs " +
                     std::to_string(data.labels.size()) + " labels");
  }
  if (batch_size == 0) throw ConfigError("latent classifier: batch size must be >= 1");

  SoftmaxClassifier clf;
  clf.classes = data.labels;
  std::sort(clf.classes.begin(), clf.classes.end());
  clf.classes.erase(std::unique(clf.classes.begin(), clf.classes.end()), clf.classes.end());
  std::vector<std::uint32_t> target(data.labels.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i] = static_cast<std::uint32_t>(
        std::lower_bound(clf.classes.begin(), clf.classes.end(), data.labels[i]) - clf.classes.begin());
  }

  const auto d = data.z.cols();
  const auto k = static_cast<Eigen::Index>(clf.classes.size());
  ParamStore<float> store;
  const float bound = static_cast<float>(std::sqrt(6.0 / static_cast<double>(d + k)));
  Matrix w(d, k);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
  store.add("softmax.weight", "softmax", std::move(w));
  store.add("softmax.bias", "softmax", Matrix::Zero(1, k));
  AdamState<float> opt(store, store.all_indices(), AdamConfig{lr, 0.5, 0.999, 1e-8});

  std::vector<std::uint32_t> order(target.size());
  std::iota(order.begin(), order.end(), 0u);
  for (std::size_t e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      const std::vector<std::uint32_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                            order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<std::uint32_t> y(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) y[i] = target[rows[i]];
      Graph<float> g;
      Var logits = ops::affine(g, g.constant(gather_rows(data.z, rows), "latent batch"), g.parameter(store, 0),
                               g.parameter(store, 1));
      Var loss = ops::cross_entropy_with_logits(g, logits, y);
      g.backward(loss, store);
      opt.step(store);
    }
  }
  clf.weight = store.at(0).value;
  clf.bias = store.at(1).value;
  return clf;
}

std::map<std::uint32_t, double> per_class_top1(const std::vector<std::uint32_t>& truth,
                                               const std::vector<std::uint32_t>& predicted) {
  if (truth.size() != predicted.size()) {
    throw ShapeError("per-class accuracy: " + std::to_string(truth.size()) + " labels vs " +
                     std::to_string(predicted.size()) + " predictions");
  }
  std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> tally;  // class -> (correct, total)
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& t = tally[truth[i]];
    t.first += truth[i] == predicted[i] ? 1 : 0;
    t.second += 1;
  }
  std::map<std::uint32_t, double> out;
  for (const auto& [c, t] : tally) out[c] = 100.0 * static_cast<double>(t.first) / static_cast<double>(t.second);
  return out;
}

std::map<std::uint32_t, double> per_class_top1(const SoftmaxClassifier& clf, const HsvaModel<float>& model,
                                               const ZslDataset& ds, const std::vector<std::uint32_t>& rows, Rng& rng,
                                               bool use_mean) {
  if (rows.empty()) throw DataError("per-class accuracy: evaluation split is empty");
  std::vector<std::uint32_t> truth(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) truth[i] = ds.labels.at(rows[i]);
  return per_class_top1(truth, clf.predict(encode_features(model, ds, rows, rng, use_mean)));
}

double macro_mean(const std::map<std::uint32_t, double>& per_class) {
  if (per_class.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [c, acc] : per_class) sum += acc;
  return sum / static_cast<double>(per_class.size());
}

double harmonic_mean(double u, double s) {
  if (!(u >= 0.0) || !(s >= 0.0)) {
    throw ConfigError("harmonic mean needs non-negative inputs, got U=" + std::to_string(u) +
                      ", S=" + std::to_string(s));
  }
  if (u + s == 0.0) return 0.0;
  return 2.0 * s * u / (s + u);
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["protocol"] = to_string(r.protocol);
  j["acc"] = round2(r.acc);
  j["u"] = round2(r.u);
  j["s"] = round2(r.s);
  j["h"] = round2(r.h);
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  for (const auto& [c, acc] : r.per_class) pc[std::to_string(c)] = round2(acc);
  j["per_class"] = std::move(pc);
  j["seed"] = r.seed;
  if (r.protocol == Protocol::kCzsl) {
    j["counts"] = {{"unseen", r.counts.unseen}};
  } else {
    j["counts"] = {{"unseen", r.counts.gzsl_unseen}, {"seen", r.counts.gzsl_seen}};
  }
  return j;
}

MetricsReport score_classifier(const SoftmaxClassifier& clf, const HsvaModel<float>& model, const ZslDataset& ds,
                               Protocol protocol, const EvalConfig& cfg) {
  Rng test_rng = Rng(cfg.seed).split(kTestEncoding);
  MetricsReport r;
  r.protocol = protocol;
  r.seed = cfg.seed;
  r.counts = cfg.counts;
  if (protocol == Protocol::kCzsl) {
    r.per_class = per_class_top1(clf, model, ds, ds.test_unseen_idx, test_rng, cfg.use_mean);
    r.acc = macro_mean(r.per_class);
    return r;
  }
  const auto unseen = per_class_top1(clf, model, ds, ds.test_unseen_idx, test_rng, cfg.use_mean);
  const auto seen = per_class_top1(clf, model, ds, ds.test_seen_idx, test_rng, cfg.use_mean);
  r.u = macro_mean(unseen);
  r.s = macro_mean(seen);
  r.h = harmonic_mean(r.u, r.s);
  r.per_class = unseen;
  r.per_class.insert(seen.begin(), seen.end());
  return r;
}

namespace {

MetricsReport run_protocol(const HsvaModel<float>& model, const ZslDataset& ds, const EvalConfig& cfg,
                           Protocol protocol) {
  cfg.validate();
  const Architecture& arch = model.architecture();
  if (arch.visual_dim != ds.visual_dim() || arch.attr_dim != ds.attr_dim()) {
    throw ShapeError("checkpoint expects visual_dim " + std::to_string(arch.visual_dim) + " and attr_dim " +
                     std::to_string(arch.attr_dim) + "; dataset has " + std::to_string(ds.visual_dim()) + " and " +
                     std::to_string(ds.attr_dim()));
  }
  const Rng root(cfg.seed);
  Rng synth_rng = root.split(kSynthesis);
  Rng clf_rng = root.split(kClassifier);
  const LatentSet latents = synthesize_latents(model, ds, cfg.counts, synth_rng, protocol);
  const SoftmaxClassifier clf =
      train_softmax_classifier(latents, cfg.classifier_epochs, cfg.classifier_lr, cfg.classifier_batch, clf_rng);
  return score_classifier(clf, model, ds, protocol, cfg);
}

}  // namespace

MetricsReport czsl_eval(const HsvaModel<float>& model, const ZslDataset& ds, const EvalConfig& cfg) {
  return run_protocol(model, ds, cfg, Protocol::kCzsl);
}

MetricsReport gzsl_eval(const HsvaModel<float>& model, const ZslDataset& ds, const EvalConfig& cfg) {
  return run_protocol(model, ds, cfg, Protocol::kGzsl);
}

}  // namespace hsva
