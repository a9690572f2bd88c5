#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsva/data.hpp"
#include "hsva/evaluation.hpp"
#include "hsva/gradcheck.hpp"
#include "hsva/model.hpp"
#include "hsva/training.hpp"

namespace hsva {

inline constexpr const char* kVersion = "0.1.0";

/// Everything a command needs. Exactly one of `dataset` / `synth` is set
/// after validation.
struct RunConfig {
  std::optional<std::filesystem::path> dataset;
  std::optional<SynthConfig> synth;
  bool normalize_features = false;
  /// Widths only; data dimensions are filled from the dataset.
  Architecture arch;
  TrainSchedule train;
  EvalConfig eval;
  bool eval_seed_set = false;
  /// Latent columns written to latents.csv; empty means the full vector.
  std::vector<std::size_t> latent_dims;
  GradcheckConfig gradcheck;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::filesystem::path out = "hsva_out";

  void validate() const;
};

/// Strict parse: unknown or mistyped fields raise ConfigError naming the
/// field path. Relative dataset paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);

/// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Loads or synthesizes the dataset, applying normalize_features.
ZslDataset resolve_dataset(const RunConfig& cfg);
Architecture resolve_architecture(const RunConfig& cfg, const ZslDataset& ds);

struct TrainedRun {
  HsvaModel<float> model;
  std::vector<EpochSummary> curves;
};

/// Model init and training streams both derive from `seed`.
TrainedRun train_model(const RunConfig& cfg, const ZslDataset& ds, std::uint64_t seed);

/// cfg.eval with its seed replaced by the run seed unless eval.seed was set.
EvalConfig eval_config_for(const RunConfig& cfg, std::uint64_t seed);

struct EvalResult {
  MetricsReport czsl;
  MetricsReport gzsl;
};

EvalResult evaluate_model(const HsvaModel<float>& model, const ZslDataset& ds, const EvalConfig& cfg);

/// Ablation switches of a named variant: full, no_sa, no_da_icoral, no_icoral.
Ablation ablation_variant(const std::string& name);

struct AblationRow {
  std::string variant;  // full, no_sa, no_da_icoral, no_icoral
  std::uint64_t seed = 0;
  double u = 0.0;
  double s = 0.0;
  double h = 0.0;
  double acc = 0.0;
};

/// The four variants for every seed in cfg.seeds, sharing the dataset.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const ZslDataset& ds, std::ostream& log);

/// variant,seed,u,s,h,acc rows followed by one "mean" row per variant.
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Returns the process exit code; progress goes to `log`.
int cmd_synth(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& log);
int cmd_ablate(const RunConfig& cfg, std::ostream& log);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hsva
