#include "hsva/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "hsva/numerics/ops.hpp"

namespace hsva {

double AnnealRamp::at(double epoch) const {
  const double span = std::max(0.0, end_epoch - start_epoch);
  return rate * std::clamp(epoch - start_epoch, 0.0, span);
}

void TrainSchedule::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("train.epsilon must be > 0");
  if (swd_directions < 1) throw ConfigError("train.swd_directions must be >= 1");
  if (discrepancy_repeats < 1) throw ConfigError("train.discrepancy_repeats must be >= 1");
  if (max_unseen_per_batch < 2) throw ConfigError("train.max_unseen_per_batch must be >= 2");
  const std::pair<const char*, const AnnealRamp*> ramps[] = {
      {"gamma", &gamma}, {"lambda1", &lambda1}, {"lambda2", &lambda2}, {"lambda3", &lambda3}};
  for (const auto& [name, r] : ramps) {
    if (!(r->rate >= 0.0)) throw ConfigError(std::string("train.") + name + ".rate must be >= 0");
    if (!(r->start_epoch >= 0.0)) throw ConfigError(std::string("train.") + name + ".start_epoch must be >= 0");
    if (!(r->end_epoch >= r->start_epoch)) {
      throw ConfigError(std::string("train.") + name + ".end_epoch must be >= start_epoch");
    }
  }
}

LossWeights schedule_weights(const TrainSchedule& sched, std::size_t epoch) {
  const auto e = static_cast<double>(epoch);
  return {sched.gamma.at(e), sched.lambda1.at(e), sched.lambda2.at(e), sched.lambda3.at(e)};
}

LossWeights effective_weights(const TrainSchedule& sched, std::size_t epoch) {
  LossWeights w = schedule_weights(sched, epoch);
  if (sched.ablation.disable_sa) w.l2 = 0.0;
  if (sched.ablation.disable_da_icoral) w.l3 = 0.0;
  return w;
}

template <typename Real>
Var classification_loss(Graph<Real>& g, const HsvaModel<Real>& model, Var visual_structure, Var semantic_structure,
                        std::span<const std::uint32_t> labels) {
  Var total;
  for (auto which : {ClassifierId::kFirst, ClassifierId::kSecond}) {
    for (Var s : {visual_structure, semantic_structure}) {
      Var ce = ops::cross_entropy_with_logits(g, model.classify(g, which, s), labels);
      total = total.valid() ? ops::add(g, total, ce) : ce;
    }
  }
  return total;
}

template <typename Real>
Var classifier_discrepancy(Graph<Real>& g, const HsvaModel<Real>& model, Var structure,
                           const MatrixT<Real>& directions) {
  Var p1 = ops::softmax_rows(g, model.classify(g, ClassifierId::kFirst, structure));
  Var p2 = ops::softmax_rows(g, model.classify(g, ClassifierId::kSecond, structure));
  return losses::sliced_wasserstein_discrepancy(g, p1, p2, directions);
}

template <typename Real>
JointLossVars joint_loss(Graph<Real>& g, const HsvaModel<Real>& model, const BatchT<Real>& batch,
                         const LossWeights& w, const StepNoise<Real>& noise, const Ablation& ablation) {
  JointLossVars out;
  Var x = g.constant(batch.x, "visual batch");
  Var a = g.constant(batch.a, "attribute batch");
  Var sx = model.encode_visual(g, x);
  Var sa = model.encode_semantic(g, a);
  GaussianVars gx = model.encode_common(g, sx);
  GaussianVars ga = model.encode_common(g, sa);
  Var zx = reparameterize(g, gx, noise.visual);
  Var za = reparameterize(g, ga, noise.semantic);

  out.vae_x = ops::add(g, losses::l1_reconstruction(g, x, model.decode_visual(g, zx)),
                       ops::scale(g, losses::kl_to_standard_normal(g, gx), w.gamma));
  out.vae_a = ops::add(g, losses::l1_reconstruction(g, a, model.decode_semantic(g, za)),
                       ops::scale(g, losses::kl_to_standard_normal(g, ga), w.gamma));
  out.rec_x = losses::l1_reconstruction(g, x, model.decode_visual(g, za));
  out.rec_a = losses::l1_reconstruction(g, a, model.decode_semantic(g, zx));
  out.cls = classification_loss(g, model, sx, sa, batch.labels);
  out.da = losses::gaussian_w2(g, gx, ga);

  // Covariances need two rows on each side; a single-row tail batch or a
  // single unseen class contributes no iCORAL term.
  if (batch.x.rows() >= 2 && batch.unseen_attributes.rows() >= 2) {
    Var au = g.constant(batch.unseen_attributes, "unseen attribute block");
    GaussianVars gu = model.encode_common(g, model.encode_semantic(g, au));
    Var zu = reparameterize(g, gu, noise.unseen);
    out.icoral = losses::icoral(g, zx, zu);
  } else {
    out.icoral = g.constant(MatrixT<Real>::Zero(1, 1), "empty iCORAL term");
  }

  Var total = ops::add(g, out.vae_x, out.vae_a);
  total = ops::add(g, total, ops::scale(g, ops::add(g, out.rec_x, out.rec_a), w.l1));
  total = ops::add(g, total, out.cls);
  Var adaptation = ablation.disable_icoral ? out.da : ops::add(g, out.da, out.icoral);
  out.total = ops::add(g, total, ops::scale(g, adaptation, w.l3));
  return out;
}

namespace {

template <typename Real>
double checked(const Graph<Real>& g, Var v, const char* term, std::size_t epoch, std::size_t batch) {
  const auto value = static_cast<double>(g.scalar(v));
  if (!std::isfinite(value)) {
    throw NumericalError(std::string("non-finite ") + term + " at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch));
  }
  return value;
}

void add_terms(LossTerms& acc, const LossTerms& t) {
  acc.vae_x += t.vae_x;
  acc.vae_a += t.vae_a;
  acc.rec += t.rec;
  acc.cls += t.cls;
  acc.dis1 += t.dis1;
  acc.dis2 += t.dis2;
  acc.da += t.da;
  acc.icoral += t.icoral;
}

}  // namespace

template <typename Real>
Trainer<Real>::Trainer(HsvaModel<Real>& model, TrainSchedule schedule, Rng rng)
    : model_(&model),
      schedule_(std::move(schedule)),
      rng_(std::move(rng)),
      joint_opt_(model.params(), model.params().all_indices(), schedule_.adam()),
      classifier_opt_(model.params(), model.params().indices(groups::kClassifiers), schedule_.adam()),
      encoder_opt_(model.params(), model.params().indices(groups::kTaskEncoders), schedule_.adam()) {
  schedule_.validate();
}

template <typename Real>
MatrixT<Real> Trainer<Real>::directions() {
  return sample_unit_sphere<Real>(rng_, static_cast<Eigen::Index>(schedule_.swd_directions),
                                  static_cast<Eigen::Index>(model_->architecture().n_seen_classes));
}

template <typename Real>
StepReport Trainer<Real>::step_joint(const BatchT<Real>& batch, const LossWeights& w) {
  const auto latent = static_cast<Eigen::Index>(model_->architecture().latent_dim);
  StepNoise<Real> noise{sample_standard_normal<Real>(rng_, batch.x.rows(), latent),
                        sample_standard_normal<Real>(rng_, batch.a.rows(), latent),
                        sample_standard_normal<Real>(rng_, batch.unseen_attributes.rows(), latent)};
  Graph<Real> g;
  JointLossVars v = joint_loss(g, *model_, batch, w, noise, schedule_.ablation);

  StepReport r;
  r.epoch = epoch_;
  r.batch = batch_;
  r.weights = w;
  r.terms.vae_x = checked(g, v.vae_x, "vae_x", epoch_, batch_);
  r.terms.vae_a = checked(g, v.vae_a, "vae_a", epoch_, batch_);
  r.terms.rec = checked(g, v.rec_x, "rec (visual)", epoch_, batch_) + checked(g, v.rec_a, "rec (semantic)", epoch_, batch_);
  r.terms.cls = checked(g, v.cls, "cls", epoch_, batch_);
  r.terms.da = checked(g, v.da, "da", epoch_, batch_);
  r.terms.icoral = checked(g, v.icoral, "icoral", epoch_, batch_);
  r.objective = checked(g, v.total, "joint objective", epoch_, batch_);

  g.backward(v.total, model_->params());
  joint_opt_.step(model_->params());
  return r;
}

template <typename Real>
StepReport Trainer<Real>::step_max_discrepancy(const BatchT<Real>& batch, const LossWeights& w) {
  const MatrixT<Real> dirs = directions();
  Graph<Real> g;
  for (const auto& group : {groups::kVisualEncoder, groups::kSemanticEncoder, groups::kCommonEncoder,
                            groups::kVisualDecoder, groups::kSemanticDecoder}) {
    g.freeze(group);
  }
  Var sx = model_->encode_visual(g, g.constant(batch.x, "visual batch"));
  Var sa = model_->encode_semantic(g, g.constant(batch.a, "attribute batch"));
  Var cls = classification_loss(g, *model_, sx, sa, batch.labels);
  Var dis = ops::scale(
      g, ops::add(g, classifier_discrepancy(g, *model_, sx, dirs), classifier_discrepancy(g, *model_, sa, dirs)), -1.0);
  Var total = ops::add(g, cls, ops::scale(g, dis, w.l2));

  StepReport r;
  r.epoch = epoch_;
  r.batch = batch_;
  r.weights = w;
  r.terms.cls = checked(g, cls, "cls", epoch_, batch_);
  r.terms.dis1 = checked(g, dis, "dis1", epoch_, batch_);
  r.objective = checked(g, total, "discrepancy-maximization objective", epoch_, batch_);

  g.backward(total, model_->params());
  classifier_opt_.step(model_->params());
  return r;
}

template <typename Real>
StepReport Trainer<Real>::step_min_discrepancy(const BatchT<Real>& batch, const LossWeights& w,
                                               std::size_t repeats) {
  if (repeats < 1) throw ConfigError("discrepancy repeats must be >= 1");
  const MatrixT<Real> dirs = directions();
  StepReport r;
  r.epoch = epoch_;
  r.batch = batch_;
  r.weights = w;
  for (std::size_t k = 0; k < repeats; ++k) {
    Graph<Real> g;
    g.freeze(groups::kClassifier1);
    g.freeze(groups::kClassifier2);
    Var sx = model_->encode_visual(g, g.constant(batch.x, "visual batch"));
    Var sa = model_->encode_semantic(g, g.constant(batch.a, "attribute batch"));
    Var dis = ops::add(g, classifier_discrepancy(g, *model_, sx, dirs), classifier_discrepancy(g, *model_, sa, dirs));
    Var total = ops::scale(g, dis, w.l2);
    const double d = checked(g, dis, "dis2", epoch_, batch_);
    const double obj = checked(g, total, "discrepancy-minimization objective", epoch_, batch_);
    if (k == 0) {
      r.terms.dis2 = d;
      r.objective = obj;
    }
    g.backward(total, model_->params());
    encoder_opt_.step(model_->params());
  }
  return r;
}

template <typename Real>
EpochSummary Trainer<Real>::train_epoch(const ZslDataset& ds, std::size_t epoch) {
  if (ds.train_idx.empty()) throw DataError("training split is empty");
  const LossWeights w = effective_weights(schedule_, epoch);
  const auto batches = batch_iter(ds, schedule_.batch_size, rng_, schedule_.max_unseen_per_batch);

  EpochSummary summary;
  summary.epoch = epoch;
  summary.weights = w;
  epoch_ = epoch;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    batch_ = b;
    BatchT<Real> batch;
    if constexpr (std::is_same_v<Real, float>) {
      batch = batches[b];
    } else {
      batch = batches[b].template cast<Real>();
    }
    LossTerms t = step_joint(batch, w).terms;
    if (!schedule_.ablation.disable_sa) {
      t.dis1 = step_max_discrepancy(batch, w).terms.dis1;
      t.dis2 = step_min_discrepancy(batch, w, schedule_.discrepancy_repeats).terms.dis2;
    }
    add_terms(summary.mean, t);
  }
  summary.batches = batches.size();
  const double inv = 1.0 / static_cast<double>(batches.size());
  for (double* f : {&summary.mean.vae_x, &summary.mean.vae_a, &summary.mean.rec, &summary.mean.cls,
                    &summary.mean.dis1, &summary.mean.dis2, &summary.mean.da, &summary.mean.icoral}) {
    *f *= inv;
  }
  return summary;
}

template <typename Real>
std::uint64_t Trainer<Real>::optimizer_steps() const {
  return joint_opt_.steps() + classifier_opt_.steps() + encoder_opt_.steps();
}

template class Trainer<float>;
template class Trainer<double>;

#define HSVA_INSTANTIATE_TRAINING(Real)                                                                         \
  template Var classification_loss<Real>(Graph<Real>&, const HsvaModel<Real>&, Var, Var,                       \
                                         std::span<const std::uint32_t>);                                      \
  template Var classifier_discrepancy<Real>(Graph<Real>&, const HsvaModel<Real>&, Var, const MatrixT<Real>&);  \
  template JointLossVars joint_loss<Real>(Graph<Real>&, const HsvaModel<Real>&, const BatchT<Real>&,           \
                                          const LossWeights&, const StepNoise<Real>&, const Ablation&);
HSVA_INSTANTIATE_TRAINING(float)
HSVA_INSTANTIATE_TRAINING(double)
#undef HSVA_INSTANTIATE_TRAINING

FitResult fit(HsvaModel<float>& model, const ZslDataset& ds, const TrainSchedule& sched, Rng rng,
              const std::function<void(const EpochSummary&)>& on_epoch) {
  const Architecture& arch = model.architecture();
  if (arch.visual_dim != ds.visual_dim() || arch.attr_dim != ds.attr_dim() ||
      arch.n_seen_classes != ds.seen_classes.size()) {
    throw ShapeError("model expects visual_dim " + std::to_string(arch.visual_dim) + ", attr_dim " +
                     std::to_string(arch.attr_dim) + ", " + std::to_string(arch.n_seen_classes) +
                     " seen classes; dataset has " + std::to_string(ds.visual_dim()) + ", " +
                     std::to_string(ds.attr_dim()) + ", " + std::to_string(ds.seen_classes.size()));
  }
  FitResult result;
  if (sched.epochs == 0) return result;
  Trainer<float> trainer(model, sched, std::move(rng));
  for (std::size_t e = 0; e < sched.epochs; ++e) {
    result.curves.push_back(trainer.train_epoch(ds, e));
    if (on_epoch) on_epoch(result.curves.back());
  }
  return result;
}

std::string curves_csv(const std::vector<EpochSummary>& curves) {
  std::ostringstream out;
  out << "epoch,vae_x,vae_a,rec,cls,dis1,dis2,da,icoral,gamma,l1,l2,l3\n";
  char buf[64];
  auto put = [&](double v) {
    // Avoid "-0.000000" so equal runs print equal bytes regardless of sign of zero.
    std::snprintf(buf, sizeof buf, ",%.6f", v == 0.0 ? 0.0 : v);
    std::string s(buf);
    if (s == ",-0.000000") s = ",0.000000";
    out << s;
  };
  for (const auto& c : curves) {
    out << c.epoch;
    for (double v : {c.mean.vae_x, c.mean.vae_a, c.mean.rec, c.mean.cls, c.mean.dis1, c.mean.dis2, c.mean.da,
                     c.mean.icoral, c.weights.gamma, c.weights.l1, c.weights.l2, c.weights.l3}) {
      put(v);
    }
    out << '\n';
  }
  return out.str();
}

void write_curves_csv(const std::vector<EpochSummary>& curves, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << curves_csv(curves);
  if (!f) throw IoError("error writing '" + path.string() + "'");
}

}  // namespace hsva
