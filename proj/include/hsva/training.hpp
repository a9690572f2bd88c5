#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hsva/data.hpp"
#include "hsva/model.hpp"
#include "hsva/numerics/adam.hpp"

namespace hsva {

/// weight(e) = rate * clamp(e - start_epoch, 0, end_epoch - start_epoch):
/// zero until start_epoch, linear ramp, constant from end_epoch on.
struct AnnealRamp {
  double rate = 0.0;
  double start_epoch = 0.0;
  double end_epoch = 0.0;

  double at(double epoch) const;
};

struct LossWeights {
  double gamma = 0.0;  // KL weight inside both VAE losses
  double l1 = 0.0;     // cross reconstruction
  double l2 = 0.0;     // structure-adaptation discrepancy
  double l3 = 0.0;     // distribution adaptation (W2 + iCORAL)
};

/// Switches that drop parts of the objective.
struct Ablation {
  bool disable_sa = false;         // lambda2 = 0 and both adversarial steps skipped
  bool disable_da_icoral = false;  // lambda3 = 0
  bool disable_icoral = false;     // drop only the iCORAL term
};

struct TrainSchedule {
  std::size_t epochs = 100;
  std::size_t batch_size = 50;
  double learning_rate = 1.5e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t swd_directions = 128;
  std::size_t discrepancy_repeats = 1;
  std::size_t max_unseen_per_batch = 64;
  AnnealRamp gamma{0.0026, 0.0, 90.0};
  AnnealRamp lambda1{0.044, 21.0, 75.0};
  AnnealRamp lambda2{0.54, 0.0, 22.0};
  AnnealRamp lambda3{0.54, 0.0, 22.0};
  Ablation ablation;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

/// Raw annealed weights at `epoch` (no ablation applied).
LossWeights schedule_weights(const TrainSchedule& sched, std::size_t epoch);

/// Weights actually used for training: the ablation switches zero lambda2
/// (disable_sa) and lambda3 (disable_da_icoral).
LossWeights effective_weights(const TrainSchedule& sched, std::size_t epoch);

/// Values of every loss term. Terms a step does not evaluate stay 0.
struct LossTerms {
  double vae_x = 0.0;
  double vae_a = 0.0;
  double rec = 0.0;
  double cls = 0.0;
  double dis1 = 0.0;
  double dis2 = 0.0;
  double da = 0.0;
  double icoral = 0.0;
};

struct StepReport {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  LossTerms terms;
  LossWeights weights;
  double objective = 0.0;  // value the step minimized, before its update
};

/// Reparameterization noise for one joint step: visual, semantic and unseen
/// semantic branches.
template <typename Real>
struct StepNoise {
  MatrixT<Real> visual;
  MatrixT<Real> semantic;
  MatrixT<Real> unseen;
};

/// Graph handles of every term of the joint objective.
struct JointLossVars {
  Var total;
  Var vae_x;
  Var vae_a;
  Var rec_x;
  Var rec_a;
  Var cls;
  Var da;
  Var icoral;
};

/// Records vae_x + vae_a + l1 * rec + cls + l3 * (icoral + da).
/// The KL weight gamma sits inside each VAE loss. With
/// ablation.disable_icoral the iCORAL term is evaluated but left out of the total.
template <typename Real>
JointLossVars joint_loss(Graph<Real>& g, const HsvaModel<Real>& model, const BatchT<Real>& batch,
                         const LossWeights& w, const StepNoise<Real>& noise, const Ablation& ablation);

/// Sum of the four cross-entropies of both classifiers on both embeddings.
template <typename Real>
Var classification_loss(Graph<Real>& g, const HsvaModel<Real>& model, Var visual_structure, Var semantic_structure,
                        std::span<const std::uint32_t> labels);

/// SWD between the softmax outputs of the two classifiers on one embedding batch.
template <typename Real>
Var classifier_discrepancy(Graph<Real>& g, const HsvaModel<Real>& model, Var structure,
                           const MatrixT<Real>& directions);

struct EpochSummary {
  std::size_t epoch = 0;
  LossTerms mean;
  LossWeights weights;
  std::size_t batches = 0;
};

/// Alternating optimizer of the full objective. Owns three Adam states:
/// all parameters (joint step), the two classifiers (discrepancy
/// maximization) and the two task encoders (discrepancy minimization).
template <typename Real>
class Trainer {
 public:
  Trainer(HsvaModel<Real>& model, TrainSchedule schedule, Rng rng);

  /// One Adam step on every parameter group.
  StepReport step_joint(const BatchT<Real>& batch, const LossWeights& w);
  /// One Adam step on Cls1/Cls2 minimizing cls - l2 * (discrepancy on both embeddings) with every
  /// other group frozen.
  StepReport step_max_discrepancy(const BatchT<Real>& batch, const LossWeights& w);
  /// `repeats` Adam steps on Ex/Ea minimizing l2 * (discrepancy on both embeddings) with the
  /// classifiers frozen.
  StepReport step_min_discrepancy(const BatchT<Real>& batch, const LossWeights& w, std::size_t repeats);

  /// One pass over shuffled training batches: joint, then max, then min per batch.
  EpochSummary train_epoch(const ZslDataset& ds, std::size_t epoch);

  std::uint64_t optimizer_steps() const;
  const TrainSchedule& schedule() const { return schedule_; }
  Rng& rng() { return rng_; }

 private:
  MatrixT<Real> directions();

  HsvaModel<Real>* model_;
  TrainSchedule schedule_;
  Rng rng_;
  AdamState<Real> joint_opt_;
  AdamState<Real> classifier_opt_;
  AdamState<Real> encoder_opt_;
  std::size_t epoch_ = 0;  // position reported in StepReport and error messages
  std::size_t batch_ = 0;
};

extern template class Trainer<float>;
extern template class Trainer<double>;

struct FitResult {
  std::vector<EpochSummary> curves;
};

/// Runs schedule.epochs epochs. `on_epoch`, if set, is called after each.
FitResult fit(HsvaModel<float>& model, const ZslDataset& ds, const TrainSchedule& sched, Rng rng,
              const std::function<void(const EpochSummary&)>& on_epoch = {});

/// CSV with header epoch,vae_x,vae_a,rec,cls,dis1,dis2,da,icoral,gamma,l1,l2,l3
/// and 6 decimals per value.
std::string curves_csv(const std::vector<EpochSummary>& curves);
void write_curves_csv(const std::vector<EpochSummary>& curves, const std::filesystem::path& path);

}  // namespace hsva
