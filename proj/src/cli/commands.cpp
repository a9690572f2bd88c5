#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "hsva/cli.hpp"

namespace hsva {
namespace {

enum Stream : std::uint64_t { kInit = 1, kTraining = 2, kLatentDump = 4 };

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw IoError("error writing '" + path.string() + "'");
}

void make_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string latents_csv(const HsvaModel<float>& model, const ZslDataset& ds, const RunConfig& cfg,
                        const EvalConfig& eval) {
  std::vector<std::uint32_t> rows = ds.test_seen_idx;
  rows.insert(rows.end(), ds.test_unseen_idx.begin(), ds.test_unseen_idx.end());
  Rng rng = Rng(eval.seed).split(kLatentDump);
  const Matrix z = encode_features(model, ds, rows, rng, eval.use_mean);

  std::vector<std::size_t> dims = cfg.latent_dims;
  if (dims.empty()) {
    for (std::size_t j = 0; j < static_cast<std::size_t>(z.cols()); ++j) dims.push_back(j);
  }
  std::ostringstream out;
  out << "sample_id,class,seen";
  for (auto d : dims) out << ",z" << d;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << rows[i] << ',' << ds.labels[rows[i]] << ',' << (i < ds.test_seen_idx.size() ? 1 : 0);
    for (auto d : dims) {
      std::snprintf(buf, sizeof buf, ",%.6f", static_cast<double>(z(static_cast<Eigen::Index>(i),
                                                                      static_cast<Eigen::Index>(d))));
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

struct Variant {
  const char* name;
  Ablation ablation;
};

const Variant kVariants[] = {
    {"full", {}},
    {"no_sa", {true, false, false}},
    {"no_da_icoral", {false, true, false}},
    {"no_icoral", {false, false, true}},
};

}  // namespace

EvalConfig eval_config_for(const RunConfig& cfg, std::uint64_t seed) {
  EvalConfig e = cfg.eval;
  if (!cfg.eval_seed_set) e.seed = seed;
  return e;
}

Ablation ablation_variant(const std::string& name) {
  for (const auto& v : kVariants) {
    if (name == v.name) return v.ablation;
  }
  throw ConfigError("unknown ablation variant '" + name + "'");
}

ZslDataset resolve_dataset(const RunConfig& cfg) {
  ZslDataset ds = cfg.dataset ? load_dataset(*cfg.dataset) : synth_generate(cfg.synth.value());
  if (cfg.normalize_features) minmax_normalize_features(ds);
  return ds;
}

Architecture resolve_architecture(const RunConfig& cfg, const ZslDataset& ds) {
  Architecture arch = cfg.arch;
  arch.visual_dim = ds.visual_dim();
  arch.attr_dim = ds.attr_dim();
  arch.n_seen_classes = ds.seen_classes.size();
  arch.validate();
  return arch;
}

TrainedRun train_model(const RunConfig& cfg, const ZslDataset& ds, std::uint64_t seed) {
  const Rng root(seed);
  Rng init = root.split(kInit);
  TrainedRun run{HsvaModel<float>(resolve_architecture(cfg, ds), init), {}};
  run.curves = fit(run.model, ds, cfg.train, root.split(kTraining)).curves;
  return run;
}

EvalResult evaluate_model(const HsvaModel<float>& model, const ZslDataset& ds, const EvalConfig& cfg) {
  return {czsl_eval(model, ds, cfg), gzsl_eval(model, ds, cfg)};
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const ZslDataset& ds, std::ostream& log) {
  std::vector<AblationRow> rows;
  for (auto seed : cfg.seeds) {
    for (const auto& v : kVariants) {
      RunConfig variant = cfg;
      variant.train.ablation = v.ablation;
      const TrainedRun run = train_model(variant, ds, seed);
      const EvalResult r = evaluate_model(run.model, ds, eval_config_for(cfg, seed));
      rows.push_back({v.name, seed, r.gzsl.u, r.gzsl.s, r.gzsl.h, r.czsl.acc});
      log << v.name << " seed " << seed << ": acc " << fixed(r.czsl.acc, 2) << " u " << fixed(r.gzsl.u, 2) << " s "
          << fixed(r.gzsl.s, 2) << " h " << fixed(r.gzsl.h, 2) << '\n';
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "variant,seed,u,s,h,acc\n";
  std::vector<std::string> order;
  std::map<std::string, std::pair<AblationRow, std::size_t>> sums;
  for (const auto& r : rows) {
    out << r.variant << ',' << r.seed << ',' << fixed(r.u, 2) << ',' << fixed(r.s, 2) << ',' << fixed(r.h, 2) << ','
        << fixed(r.acc, 2) << '\n';
    auto [it, fresh] = sums.try_emplace(r.variant, AblationRow{r.variant, 0, 0, 0, 0, 0}, 0);
    if (fresh) order.push_back(r.variant);
    auto& [acc, n] = it->second;
    acc.u += r.u;
    acc.s += r.s;
    acc.h += r.h;
    acc.acc += r.acc;
    ++n;
  }
  for (const auto& name : order) {
    const auto& [acc, n] = sums.at(name);
    const double k = static_cast<double>(n);
    out << name << ",mean," << fixed(acc.u / k, 2) << ',' << fixed(acc.s / k, 2) << ',' << fixed(acc.h / k, 2) << ','
        << fixed(acc.acc / k, 2) << '\n';
  }
  return out.str();
}

int cmd_synth(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.synth) throw ConfigError("synth: the config has no 'synth' section");
  const ZslDataset ds = synth_generate(*cfg.synth);
  save_dataset(ds, cfg.out);
  log << "wrote " << cfg.out.string() << ": " << ds.n_samples() << " samples, " << ds.n_classes() << " classes ("
      << ds.seen_classes.size() << " seen, " << ds.unseen_classes.size() << " unseen), train " << ds.train_idx.size()
      << ", test_seen " << ds.test_seen_idx.size() << ", test_unseen " << ds.test_unseen_idx.size() << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  const ZslDataset ds = resolve_dataset(cfg);
  make_out_dir(cfg.out);
  const auto start = std::chrono::steady_clock::now();
  const Rng root(cfg.seed);
  Rng init = root.split(kInit);
  HsvaModel<float> model(resolve_architecture(cfg, ds), init);
  const FitResult result = fit(model, ds, cfg.train, root.split(kTraining), [&](const EpochSummary& e) {
    if (e.epoch % 10 == 9 || e.epoch + 1 == cfg.train.epochs) {
      log << "epoch " << e.epoch << ": vae_x " << fixed(e.mean.vae_x, 4) << " rec " << fixed(e.mean.rec, 4) << " cls "
          << fixed(e.mean.cls, 4) << " da " << fixed(e.mean.da, 4) << '\n';
    }
  });
  save_checkpoint(model, cfg.out / "checkpoint.bin");
  write_curves_csv(result.curves, cfg.out / "curves.csv");

  nlohmann::ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["config_hash"] = config_hash(cfg);
  manifest["seed"] = cfg.seed;
  manifest["timestamp"] = utc_timestamp();
  manifest["train_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest["config"] = run_config_to_json(cfg);
  write_text(cfg.out / "manifest.json", manifest.dump(2) + "\n");
  log << "wrote " << (cfg.out / "checkpoint.bin").string() << ", curves.csv, manifest.json\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log) {
  const ZslDataset ds = resolve_dataset(cfg);
  const HsvaModel<float> model = load_checkpoint(checkpoint);
  const EvalConfig eval = eval_config_for(cfg, cfg.seed);
  const EvalResult r = evaluate_model(model, ds, eval);
  make_out_dir(cfg.out);
  nlohmann::ordered_json j;
  j["czsl"] = to_json(r.czsl);
  j["gzsl"] = to_json(r.gzsl);
  write_text(cfg.out / "metrics.json", j.dump(2) + "\n");
  write_text(cfg.out / "latents.csv", latents_csv(model, ds, cfg, eval));
  log << "CZSL acc " << fixed(r.czsl.acc, 2) << " | GZSL u " << fixed(r.gzsl.u, 2) << " s " << fixed(r.gzsl.s, 2)
      << " h " << fixed(r.gzsl.h, 2) << '\n';
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& log) {
  GradcheckConfig gc = cfg.gradcheck;
  gc.seed = cfg.seed;
  const auto results = run_gradcheck(gc);
  log << format_gradcheck(results);
  for (const auto& r : results) {
    if (!r.passed) return 2;
  }
  return 0;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& log) {
  const ZslDataset ds = resolve_dataset(cfg);
  make_out_dir(cfg.out);
  const std::string csv = ablation_csv(run_ablation(cfg, ds, log));
  write_text(cfg.out / "ablation.csv", csv);
  log << csv;
  return 0;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot learning with two partially aligned VAEs"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::string checkpoint;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Seed (the synthesis seed for 'synth')");
    sub->add_option("--out", out_dir, "Output directory");
  };
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  CLI::App* train = app.add_subcommand("train", "Train a model; writes checkpoint, curves and manifest");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint under CZSL and GZSL");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every loss term");
  CLI::App* ablate = app.add_subcommand("ablate", "Train and evaluate the full model and three ablations");
  for (CLI::App* sub : {synth, train, eval, gradcheck, ablate}) add_common(sub);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint written by 'train'")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (!cfg.dataset && !cfg.synth) cfg.synth = SynthConfig{};
    if (out_dir) cfg.out = *out_dir;
    if (seed) {
      if (synth->parsed()) {
        if (!cfg.synth) throw ConfigError("synth: --seed needs a synth section, config names a dataset");
        cfg.synth->seed = *seed;
      } else {
        cfg.seed = *seed;
      }
    }
    cfg.validate();
    if (synth->parsed()) return cmd_synth(cfg, out);
    if (train->parsed()) return cmd_train(cfg, out);
    if (eval->parsed()) return cmd_eval(cfg, checkpoint, out);
    if (gradcheck->parsed()) return cmd_gradcheck(cfg, out);
    return cmd_ablate(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace hsva
