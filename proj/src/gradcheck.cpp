#include "hsva/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "hsva/numerics/ops.hpp"
#include "hsva/training.hpp"

namespace hsva {
namespace {

using Term = std::function<Var(Graph<double>&, const HsvaModel<double>&)>;

struct Fixture {
  BatchT<double> batch;
  StepNoise<double> noise;
  MatrixD directions;
  LossWeights weights{0.5, 1.0, 1.0, 1.0};
};

Architecture small_architecture() {
  Architecture arch;
  arch.visual_dim = 6;
  arch.attr_dim = 4;
  arch.n_seen_classes = 3;
  arch.structure_dim = 5;
  arch.latent_dim = 3;
  arch.common_hidden = {4};
  arch.visual_decoder_hidden = {5};
  arch.semantic_decoder_hidden = {4};
  return arch;
}

Fixture make_fixture(const Architecture& arch, Rng& rng) {
  constexpr Eigen::Index kBatch = 5;
  constexpr Eigen::Index kUnseen = 3;
  Fixture f;
  f.batch.x = sample_standard_normal<double>(rng, kBatch, static_cast<Eigen::Index>(arch.visual_dim));
  const MatrixD class_attr =
      sample_standard_normal<double>(rng, static_cast<Eigen::Index>(arch.n_seen_classes),
                                     static_cast<Eigen::Index>(arch.attr_dim));
  f.batch.a.resize(kBatch, static_cast<Eigen::Index>(arch.attr_dim));
  for (Eigen::Index i = 0; i < kBatch; ++i) {
    const auto label = static_cast<std::uint32_t>(i % static_cast<Eigen::Index>(arch.n_seen_classes));
    f.batch.labels.push_back(label);
    f.batch.sample_ids.push_back(static_cast<std::uint32_t>(i));
    f.batch.a.row(i) = class_attr.row(label);
  }
  f.batch.unseen_attributes =
      sample_standard_normal<double>(rng, kUnseen, static_cast<Eigen::Index>(arch.attr_dim));
  f.batch.unseen_ids = {3, 4, 5};
  const auto latent = static_cast<Eigen::Index>(arch.latent_dim);
  f.noise = {sample_standard_normal<double>(rng, kBatch, latent), sample_standard_normal<double>(rng, kBatch, latent),
             sample_standard_normal<double>(rng, kUnseen, latent)};
  f.directions = sample_unit_sphere<double>(rng, 8, static_cast<Eigen::Index>(arch.n_seen_classes));
  return f;
}

std::vector<std::pair<std::string, Term>> make_terms(const Fixture& f) {
  auto joint = [&f](auto pick) {
    return [&f, pick](Graph<double>& g, const HsvaModel<double>& m) {
      return pick(joint_loss(g, m, f.batch, f.weights, f.noise, Ablation{}));
    };
  };
  auto discrepancy = [&f](double sign) {
    return [&f, sign](Graph<double>& g, const HsvaModel<double>& m) {
      Var sx = m.encode_visual(g, g.constant(f.batch.x));
      Var sa = m.encode_semantic(g, g.constant(f.batch.a));
      Var d = ops::add(g, classifier_discrepancy(g, m, sx, f.directions), classifier_discrepancy(g, m, sa, f.directions));
      return ops::scale(g, d, sign);
    };
  };
  return {
      {"vae_x", joint([](const JointLossVars& v) { return v.vae_x; })},
      {"vae_a", joint([](const JointLossVars& v) { return v.vae_a; })},
      {"rec_x", joint([](const JointLossVars& v) { return v.rec_x; })},
      {"rec_a", joint([](const JointLossVars& v) { return v.rec_a; })},
      {"cls", joint([](const JointLossVars& v) { return v.cls; })},
      {"dis1", discrepancy(-1.0)},
      {"dis2", discrepancy(1.0)},
      {"da", joint([](const JointLossVars& v) { return v.da; })},
      {"icoral", joint([](const JointLossVars& v) { return v.icoral; })},
  };
}

double evaluate(const Term& term, const HsvaModel<double>& model) {
  Graph<double> g;
  return g.scalar(term(g, model));
}

GradcheckResult check(const std::string& name, const Term& term, HsvaModel<double>& model, const GradcheckConfig& cfg) {
  auto& store = model.params();
  store.zero_grad();
  double value = 0.0;
  {
    Graph<double> g;
    Var loss = term(g, model);
    value = g.scalar(loss);
    g.backward(loss, store);
  }

  double diff2 = 0.0;
  double analytic2 = 0.0;
  double numeric2 = 0.0;
  std::size_t count = 0;
  const double corrupt = name == cfg.corrupt_term ? 1.01 : 1.0;
  for (auto& p : store) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& w = p.value.data()[i];
      const double saved = w;
      w = saved + cfg.step;
      const double up = evaluate(term, model);
      w = saved - cfg.step;
      const double down = evaluate(term, model);
      w = saved;
      const double numeric = (up - down) / (2.0 * cfg.step);
      const double analytic = p.grad_ready ? corrupt * p.grad.data()[i] : 0.0;
      diff2 += (analytic - numeric) * (analytic - numeric);
      analytic2 += analytic * analytic;
      numeric2 += numeric * numeric;
      ++count;
    }
  }
  store.zero_grad();

  GradcheckResult r;
  r.term = name;
  r.value = value;
  r.parameters = count;
  const double denom = std::sqrt(std::max(analytic2, numeric2));
  r.rel_error = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
  r.passed = std::isfinite(r.rel_error) && r.rel_error <= cfg.tolerance;
  return r;
}

}  // namespace

const std::vector<std::string>& gradcheck_terms() {
  static const std::vector<std::string> names = {"vae_x", "vae_a", "rec_x", "rec_a", "cls",
                                                 "dis1",  "dis2",  "da",    "icoral"};
  return names;
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckConfig& cfg) {
  if (!cfg.corrupt_term.empty()) {
    const auto& names = gradcheck_terms();
    if (std::find(names.begin(), names.end(), cfg.corrupt_term) == names.end()) {
      throw ConfigError("gradcheck: unknown term '" + cfg.corrupt_term + "'");
    }
  }
  if (!(cfg.step > 0.0)) throw ConfigError("gradcheck.step must be > 0");
  const Architecture arch = small_architecture();
  Rng rng(cfg.seed);
  Rng init_rng = rng.split(1);
  Rng data_rng = rng.split(2);
  HsvaModel<double> model(arch, init_rng);
  const Fixture fixture = make_fixture(arch, data_rng);

  std::vector<GradcheckResult> out;
  for (const auto& [name, term] : make_terms(fixture)) out.push_back(check(name, term, model, cfg));
  return out;
}

std::string format_gradcheck(const std::vector<GradcheckResult>& results) {
  std::string out = "term      value          rel_error   params  result\n";
  char line[128];
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-8s  %+.6e  %.3e  %6zu  %s\n", r.term.c_str(), r.value, r.rel_error,
                  r.parameters, r.passed ? "PASS" : "FAIL");
    out += line;
  }
  return out;
}

}  // namespace hsva
