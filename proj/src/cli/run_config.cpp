#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "hsva/cli.hpp"

namespace hsva {
namespace {

using nlohmann::json;

// Reads the members of one JSON object, remembering which keys were
// consumed so that leftovers can be reported as unknown fields.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void count(const std::string& key, std::size_t& dst) {
    if (const json* v = take(key)) dst = as_count(*v, field(key));
  }
  void u64(const std::string& key, std::uint64_t& dst) {
    if (const json* v = take(key)) dst = as_u64(*v, field(key));
  }
  void real(const std::string& key, double& dst) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(field(key) + " must be a number");
      dst = v->get<double>();
    }
  }
  void flag(const std::string& key, bool& dst) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key) + " must be true or false");
      dst = v->get<bool>();
    }
  }
  void text(const std::string& key, std::string& dst) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(field(key) + " must be a string");
      dst = v->get<std::string>();
    }
  }
  void counts(const std::string& key, std::vector<std::size_t>& dst) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw ConfigError(field(key) + " must be an array of non-negative integers");
      dst.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        dst.push_back(as_count((*v)[i], field(key) + "[" + std::to_string(i) + "]"));
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config field '" + field(it.key()) + "'");
    }
  }

  static std::uint64_t as_u64(const json& v, const std::string& name) {
    if (!v.is_number_unsigned()) throw ConfigError(name + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }
  static std::size_t as_count(const json& v, const std::string& name) {
    return static_cast<std::size_t>(as_u64(v, name));
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_ramp(Fields& parent, const std::string& key, AnnealRamp& r) {
  const json* v = parent.take(key);
  if (v == nullptr) return;
  Fields f(*v, parent.field(key));
  f.real("rate", r.rate);
  f.real("start_epoch", r.start_epoch);
  f.real("end_epoch", r.end_epoch);
  f.finish();
}

SynthConfig parse_synth(const json& j, const std::string& path) {
  SynthConfig s;
  Fields f(j, path);
  f.count("n_classes", s.n_classes);
  f.count("n_seen", s.n_seen);
  f.count("n_unseen", s.n_unseen);
  f.count("samples_per_class", s.samples_per_class);
  f.count("visual_dim", s.visual_dim);
  f.count("attr_dim", s.attr_dim);
  f.count("prototype_dim", s.prototype_dim);
  f.real("prototype_scale", s.prototype_scale);
  f.real("feature_noise", s.feature_noise);
  f.real("attribute_noise", s.attribute_noise);
  f.real("train_fraction", s.train_fraction);
  std::string map;
  f.text("visual_map", map);
  if (!map.empty()) s.visual_map = synth_map_from_string(map);
  map.clear();
  f.text("semantic_map", map);
  if (!map.empty()) s.semantic_map = synth_map_from_string(map);
  f.u64("seed", s.seed);
  f.finish();
  return s;
}

nlohmann::ordered_json ramp_json(const AnnealRamp& r) {
  return {{"rate", r.rate}, {"start_epoch", r.start_epoch}, {"end_epoch", r.end_epoch}};
}

}  // namespace

void RunConfig::validate() const {
  if (dataset.has_value() == synth.has_value()) {
    throw ConfigError("config must set exactly one of 'dataset' (path) and 'synth' (generator settings)");
  }
  if (dataset && !std::filesystem::is_directory(*dataset)) {
    throw ConfigError("dataset: directory '" + dataset->string() + "' does not exist");
  }
  if (synth) synth->validate();
  if (arch.structure_dim < 1) throw ConfigError("arch.structure_dim must be >= 1");
  if (arch.latent_dim < 1) throw ConfigError("arch.latent_dim must be >= 1");
  train.validate();
  eval.validate();
  if (!gradcheck.corrupt_term.empty()) {
    const auto terms = gradcheck_terms();
    if (std::find(terms.begin(), terms.end(), gradcheck.corrupt_term) == terms.end()) {
      throw ConfigError("gradcheck.corrupt_term: unknown term '" + gradcheck.corrupt_term + "'");
    }
  }
  for (auto d : latent_dims) {
    if (d >= arch.latent_dim) {
      throw ConfigError("eval.latent_dims: index " + std::to_string(d) + " outside latent_dim " +
                        std::to_string(arch.latent_dim));
    }
  }
  if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  Fields top(j, "");
  if (const json* v = top.take("dataset")) {
    if (!v->is_string()) throw ConfigError("dataset must be a directory path string");
    std::filesystem::path p = v->get<std::string>();
    cfg.dataset = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  if (const json* v = top.take("synth")) cfg.synth = parse_synth(*v, "synth");
  top.flag("normalize_features", cfg.normalize_features);

  if (const json* v = top.take("arch")) {
    Fields f(*v, "arch");
    f.count("structure_dim", cfg.arch.structure_dim);
    f.count("latent_dim", cfg.arch.latent_dim);
    f.counts("visual_hidden", cfg.arch.visual_hidden);
    f.counts("semantic_hidden", cfg.arch.semantic_hidden);
    f.counts("common_hidden", cfg.arch.common_hidden);
    f.counts("visual_decoder_hidden", cfg.arch.visual_decoder_hidden);
    f.counts("semantic_decoder_hidden", cfg.arch.semantic_decoder_hidden);
    f.counts("classifier_hidden", cfg.arch.classifier_hidden);
    f.finish();
  }

  if (const json* v = top.take("train")) {
    Fields f(*v, "train");
    TrainSchedule& t = cfg.train;
    f.count("epochs", t.epochs);
    f.count("batch_size", t.batch_size);
    f.real("learning_rate", t.learning_rate);
    f.real("beta1", t.beta1);
    f.real("beta2", t.beta2);
    f.real("epsilon", t.epsilon);
    f.count("swd_directions", t.swd_directions);
    f.count("discrepancy_repeats", t.discrepancy_repeats);
    f.count("max_unseen_per_batch", t.max_unseen_per_batch);
    parse_ramp(f, "gamma", t.gamma);
    parse_ramp(f, "lambda1", t.lambda1);
    parse_ramp(f, "lambda2", t.lambda2);
    parse_ramp(f, "lambda3", t.lambda3);
    f.finish();
  }

  if (const json* v = top.take("ablation")) {
    Fields f(*v, "ablation");
    f.flag("disable_sa", cfg.train.ablation.disable_sa);
    f.flag("disable_da_icoral", cfg.train.ablation.disable_da_icoral);
    f.flag("disable_icoral", cfg.train.ablation.disable_icoral);
    f.finish();
  }

  if (const json* v = top.take("eval")) {
    Fields f(*v, "eval");
    if (const json* c = f.take("counts")) {
      Fields fc(*c, "eval.counts");
      fc.count("unseen", cfg.eval.counts.unseen);
      fc.count("gzsl_unseen", cfg.eval.counts.gzsl_unseen);
      fc.count("gzsl_seen", cfg.eval.counts.gzsl_seen);
      fc.finish();
    }
    f.count("classifier_epochs", cfg.eval.classifier_epochs);
    f.real("classifier_lr", cfg.eval.classifier_lr);
    f.count("classifier_batch", cfg.eval.classifier_batch);
    f.flag("use_mean", cfg.eval.use_mean);
    cfg.eval_seed_set = f.has("seed");
    f.u64("seed", cfg.eval.seed);
    f.counts("latent_dims", cfg.latent_dims);
    f.finish();
  }

  if (const json* v = top.take("gradcheck")) {
    Fields f(*v, "gradcheck");
    f.real("step", cfg.gradcheck.step);
    f.real("tolerance", cfg.gradcheck.tolerance);
    f.text("corrupt_term", cfg.gradcheck.corrupt_term);
    f.finish();
  }

  top.u64("seed", cfg.seed);
  if (const json* v = top.take("seeds")) {
    if (!v->is_array()) throw ConfigError("seeds must be an array of non-negative integers");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      cfg.seeds.push_back(Fields::as_u64((*v)[i], "seeds[" + std::to_string(i) + "]"));
    }
  }
  if (const json* v = top.take("out")) {
    if (!v->is_string()) throw ConfigError("out must be a directory path string");
    cfg.out = v->get<std::string>();
  }
  top.finish();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  if (cfg.dataset) j["dataset"] = cfg.dataset->generic_string();
  if (cfg.synth) {
    const SynthConfig& s = *cfg.synth;
    j["synth"] = {{"n_classes", s.n_classes},
                  {"n_seen", s.n_seen},
                  {"n_unseen", s.n_unseen},
                  {"samples_per_class", s.samples_per_class},
                  {"visual_dim", s.visual_dim},
                  {"attr_dim", s.attr_dim},
                  {"prototype_dim", s.prototype_dim},
                  {"prototype_scale", s.prototype_scale},
                  {"feature_noise", s.feature_noise},
                  {"attribute_noise", s.attribute_noise},
                  {"train_fraction", s.train_fraction},
                  {"visual_map", to_string(s.visual_map)},
                  {"semantic_map", to_string(s.semantic_map)},
                  {"seed", s.seed}};
  }
  j["normalize_features"] = cfg.normalize_features;
  nlohmann::ordered_json arch = architecture_to_json(cfg.arch);
  for (const char* k : {"visual_dim", "attr_dim", "n_seen_classes"}) arch.erase(k);
  j["arch"] = arch;
  const TrainSchedule& t = cfg.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"epsilon", t.epsilon},
                {"swd_directions", t.swd_directions},
                {"discrepancy_repeats", t.discrepancy_repeats},
                {"max_unseen_per_batch", t.max_unseen_per_batch},
                {"gamma", ramp_json(t.gamma)},
                {"lambda1", ramp_json(t.lambda1)},
                {"lambda2", ramp_json(t.lambda2)},
                {"lambda3", ramp_json(t.lambda3)}};
  j["ablation"] = {{"disable_sa", t.ablation.disable_sa},
                   {"disable_da_icoral", t.ablation.disable_da_icoral},
                   {"disable_icoral", t.ablation.disable_icoral}};
  j["eval"] = {{"counts",
                {{"unseen", cfg.eval.counts.unseen},
                 {"gzsl_unseen", cfg.eval.counts.gzsl_unseen},
                 {"gzsl_seen", cfg.eval.counts.gzsl_seen}}},
               {"classifier_epochs", cfg.eval.classifier_epochs},
               {"classifier_lr", cfg.eval.classifier_lr},
               {"classifier_batch", cfg.eval.classifier_batch},
               {"use_mean", cfg.eval.use_mean},
               {"latent_dims", cfg.latent_dims}};
  if (cfg.eval_seed_set) j["eval"]["seed"] = cfg.eval.seed;
  j["gradcheck"] = {{"step", cfg.gradcheck.step},
                    {"tolerance", cfg.gradcheck.tolerance},
                    {"corrupt_term", cfg.gradcheck.corrupt_term}};
  j["seed"] = cfg.seed;
  j["seeds"] = cfg.seeds;
  j["out"] = cfg.out.generic_string();
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  nlohmann::ordered_json j = run_config_to_json(cfg);
  j.erase("out");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hsva
