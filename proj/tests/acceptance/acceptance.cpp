// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. The training criteria take most of an hour on
// one core.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hsva/cli.hpp"
#include "hsva/losses.hpp"

namespace hsva {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
std::vector<int> selected;  // empty runs everything

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  failures += o.pass ? 0 : 1;
  std::printf("%s %d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

MatrixD uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  MatrixD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// 1. Reference (U, S) -> H rows, H rounded to one decimal.
Outcome harmonic_rows() {
  struct Row {
    const char* name;
    double u, s, h;
  };
  const Row rows[] = {{"AWA1", 59.3, 76.6, 66.8}, {"AWA2", 56.7, 79.8, 66.3}, {"CUB", 52.7, 58.3, 55.3},
                      {"SUN", 48.6, 39.0, 43.3}};
  Outcome o{true, ""};
  for (const auto& r : rows) {
    const double h = harmonic_mean(r.u, r.s);
    const bool ok = std::abs(h - r.h) <= 0.05;
    o.pass = o.pass && ok;
    o.detail += std::string(r.name) + " " + fmt(h) + (ok ? "" : " (want " + fmt(r.h, 1) + " +-0.05)") + "; ";
  }
  return o;
}

// 2. Finite differences on every loss term.
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto results = run_gradcheck(GradcheckConfig{});
  const double elapsed = seconds_since(t0);
  Outcome o{results.size() == 9 && elapsed < 60.0, ""};
  double worst = 0.0;
  for (const auto& r : results) {
    const bool ok = r.passed && r.rel_error <= 1e-4;
    o.pass = o.pass && ok;
    worst = std::max(worst, r.rel_error);
    if (!ok) o.detail += r.term + " rel " + sci(r.rel_error) + "; ";
  }
  o.detail += std::to_string(results.size()) + " terms, worst rel error " + sci(worst) + ", " + fmt(elapsed, 1) + "s";
  return o;
}

// Minimum-cost matching over all permutations, mean squared cost.
double assignment_w2(const std::vector<double>& a, std::vector<double> b) {
  std::sort(b.begin(), b.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - b[i]) * (a[i] - b[i]);
    best = std::min(best, c / static_cast<double>(a.size()));
  } while (std::next_permutation(b.begin(), b.end()));
  return best;
}

// 3. Closed forms against independent oracles.
Outcome loss_oracles() {
  Rng rng(2024);
  double kl_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    GaussianParams<double> p{uniform_matrix(rng, 1, 2, -1.0, 1.0), uniform_matrix(rng, 1, 2, -0.7, 0.7)};
    const int n = 1000000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < 2; ++j) {
        const double sd = std::exp(0.5 * p.logvar(0, j));
        const double eps = rng.normal();
        const double z = p.mu(0, j) + sd * eps;
        acc += -0.5 * eps * eps - std::log(sd) + 0.5 * z * z;
      }
    }
    kl_err = std::max(kl_err, std::abs(losses::kl_to_standard_normal(p) - acc / n));
  }

  double coral_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(5));
    const MatrixD s = uniform_matrix(rng, 3 + static_cast<Eigen::Index>(rng.below(8)), d, -2.0, 2.0);
    const MatrixD u = uniform_matrix(rng, 2 + static_cast<Eigen::Index>(rng.below(8)), d, -1.0, 3.0);
    auto cov = [](const MatrixD& x) {
      MatrixD c = MatrixD::Zero(x.cols(), x.cols());
      for (Eigen::Index a = 0; a < x.cols(); ++a) {
        for (Eigen::Index b = 0; b < x.cols(); ++b) {
          const double ma = x.col(a).sum() / static_cast<double>(x.rows());
          const double mb = x.col(b).sum() / static_cast<double>(x.rows());
          for (Eigen::Index i = 0; i < x.rows(); ++i) c(a, b) += (x(i, a) - ma) * (x(i, b) - mb);
          c(a, b) /= static_cast<double>(x.rows() - 1);
        }
      }
      return c;
    };
    double fro = 0.0;
    const MatrixD diff = cov(s) - cov(u);
    for (Eigen::Index i = 0; i < diff.size(); ++i) fro += diff.data()[i] * diff.data()[i];
    const double expected = fro / (4.0 * static_cast<double>(d * d));
    coral_err = std::max(coral_err, std::abs(losses::coral(s, u) - expected));
  }

  double swd_err = 0.0;
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(4));
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.below(4));
    const MatrixD p1 = uniform_matrix(rng, n, k, 0.0, 1.0);
    const MatrixD p2 = uniform_matrix(rng, n, k, 0.0, 1.0);
    const MatrixD dirs = sample_unit_sphere<double>(rng, 7, k);
    double expected = 0.0;
    for (Eigen::Index m = 0; m < dirs.rows(); ++m) {
      std::vector<double> a;
      std::vector<double> b;
      for (Eigen::Index i = 0; i < n; ++i) {
        a.push_back(p1.row(i).dot(dirs.row(m)));
        b.push_back(p2.row(i).dot(dirs.row(m)));
      }
      expected += assignment_w2(a, b);
    }
    expected /= static_cast<double>(dirs.rows());
    swd_err = std::max(swd_err, std::abs(losses::sliced_wasserstein_discrepancy(p1, p2, dirs) - expected));
  }

  // Diagonal Gaussians given by (mean, sd) per row and dimension.
  auto gauss = [](std::initializer_list<double> mu, std::initializer_list<double> sd) {
    const auto d = static_cast<Eigen::Index>(mu.size());
    MatrixD m(1, d);
    MatrixD var(1, d);
    Eigen::Index j = 0;
    for (double v : mu) m(0, j++) = v;
    j = 0;
    for (double v : sd) var(0, j++) = v * v;
    return GaussianParams<double>::from_variance(m, var);
  };
  struct W2Case {
    GaussianParams<double> x, a;
    double expected;
  };
  const W2Case cases[] = {
      {gauss({0, 0}, {1, 1}), gauss({3, 4}, {1, 1}), 5.0},
      {gauss({0}, {1}), gauss({0}, {3}), 2.0},
      {gauss({0}, {1}), gauss({1}, {2}), std::sqrt(2.0)},
      {gauss({1, -2, 0.5}, {0.5, 2, 1}), gauss({1, -2, 0.5}, {0.5, 2, 1}), 0.0},
      {gauss({2, 0}, {4, 1}), gauss({0, 0}, {1, 1}), std::sqrt(13.0)},
  };
  double w2_err = 0.0;
  for (const auto& c : cases) w2_err = std::max(w2_err, std::abs(losses::gaussian_w2(c.x, c.a) - c.expected));

  Outcome o;
  o.pass = kl_err <= 1e-2 && coral_err <= 1e-10 && swd_err <= 1e-9 && w2_err <= 1e-9;
  o.detail = "max errors: kl " + sci(kl_err) + " coral " + sci(coral_err) + " swd " + sci(swd_err) + " w2 " + sci(w2_err);
  return o;
}

// 4. Annealing values and plateaus.
Outcome schedule_checks() {
  const TrainSchedule s;
  auto w = [&](std::size_t e) { return schedule_weights(s, e); };
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  bool ok = near(w(90).gamma, 0.234) && near(w(75).l1, 2.376) && near(w(22).l2, 11.88) && near(w(22).l3, 11.88);
  ok = ok && w(0).gamma == 0.0 && w(21).l1 == 0.0 && w(0).l1 == 0.0 && w(0).l2 == 0.0 && w(0).l3 == 0.0;
  for (std::size_t e = 90; e <= 300; ++e) ok = ok && w(e).gamma == w(90).gamma;
  for (std::size_t e = 75; e <= 300; ++e) ok = ok && w(e).l1 == w(75).l1;
  for (std::size_t e = 22; e <= 300; ++e) ok = ok && w(e).l2 == w(22).l2 && w(e).l3 == w(22).l3;
  return {ok, "gamma(90) " + fmt(w(90).gamma) + " l1(75) " + fmt(w(75).l1) + " l2(22) " + fmt(w(22).l2) + " l3(22) " +
                  fmt(w(22).l3)};
}

struct VariantRun {
  double acc = 0.0;
  double h = 0.0;
  double seconds = 0.0;
};

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};
const std::vector<std::string> kVariants = {"full", "no_sa", "no_da_icoral", "no_icoral"};

VariantRun train_and_eval(const RunConfig& base, const ZslDataset& ds, const std::string& variant,
                          std::uint64_t seed) {
  const auto t0 = Clock::now();
  RunConfig cfg = base;
  cfg.train.ablation = ablation_variant(variant);
  const TrainedRun run = train_model(cfg, ds, seed);
  const EvalResult r = evaluate_model(run.model, ds, eval_config_for(cfg, seed));
  const VariantRun out{r.czsl.acc, r.gzsl.h, seconds_since(t0)};
  std::printf("  %s seed %llu: acc %.2f h %.2f (%.0fs)\n", variant.c_str(), static_cast<unsigned long long>(seed),
              out.acc, out.h, out.seconds);
  std::fflush(stdout);
  return out;
}

std::map<std::string, std::vector<VariantRun>> runs;

RunConfig default_run() {
  RunConfig cfg;
  cfg.synth = SynthConfig{};
  return cfg;
}

// 5. Full model on the default synthetic benchmark.
Outcome end_to_end() {
  const RunConfig cfg = default_run();
  const ZslDataset ds = resolve_dataset(cfg);
  double acc = 0.0;
  double total = 0.0;
  for (auto seed : kSeeds) {
    runs["full"].push_back(train_and_eval(cfg, ds, "full", seed));
    acc += runs["full"].back().acc;
    total += runs["full"].back().seconds;
  }
  acc /= static_cast<double>(kSeeds.size());
  return {acc >= 60.0 && total < 25.0 * 60.0,
          "mean CZSL acc " + fmt(acc, 2) + " (need >= 60), " + fmt(total / 60.0, 1) + " min (need < 25)"};
}

// 6. Ablation ordering of mean GZSL H over the same seeds.
Outcome ablation_direction() {
  const RunConfig cfg = default_run();
  const ZslDataset ds = resolve_dataset(cfg);
  std::map<std::string, double> mean_h;
  for (const auto& v : kVariants) {
    for (auto seed : kSeeds) {
      if (v != "full") runs[v].push_back(train_and_eval(cfg, ds, v, seed));
    }
    if (runs[v].size() != kSeeds.size()) throw std::runtime_error("missing runs for " + v);
    for (const auto& r : runs[v]) mean_h[v] += r.h / static_cast<double>(kSeeds.size());
  }
  bool worst = true;
  for (const auto& v : kVariants) worst = worst && (v == "no_da_icoral" || mean_h["no_da_icoral"] < mean_h[v]);
  const bool pass = mean_h["full"] > mean_h["no_icoral"] && mean_h["full"] > mean_h["no_da_icoral"] && worst;
  std::string detail = "mean H";
  for (const auto& v : kVariants) detail += " " + v + " " + fmt(mean_h[v], 2);
  return {pass, detail};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 7. Two identical train + eval invocations of the command line.
Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "hsva_acceptance_determinism";
  std::filesystem::remove_all(root);
  std::ostringstream sink;
  for (const char* name : {"a", "b"}) {
    const std::string out = (root / name).string();
    const std::string ckpt = out + "/checkpoint.bin";
    const std::vector<const char*> train = {"hsva", "train", "--seed", "11", "--out", out.c_str()};
    const std::vector<const char*> eval = {"hsva", "eval", "--seed", "11", "--checkpoint", ckpt.c_str(), "--out",
                                           out.c_str()};
    if (run_cli(static_cast<int>(train.size()), train.data(), sink, sink) != 0) return {false, "train failed"};
    if (run_cli(static_cast<int>(eval.size()), eval.data(), sink, sink) != 0) return {false, "eval failed"};
  }
  Outcome o{true, ""};
  for (const char* f : {"curves.csv", "metrics.json"}) {
    const std::string a = read_file(root / "a" / f);
    const bool same = !a.empty() && a == read_file(root / "b" / f);
    o.pass = o.pass && same;
    o.detail += std::string(f) + (same ? " identical" : " differs") + "; ";
  }
  return o;
}

std::string group_bytes(const HsvaModel<float>& model, const std::vector<std::string>& groups) {
  std::string out;
  for (const auto& p : model.params()) {
    if (std::find(groups.begin(), groups.end(), p.group) == groups.end()) continue;
    out.append(reinterpret_cast<const char*>(p.value.data()), sizeof(float) * static_cast<std::size_t>(p.value.size()));
  }
  return out;
}

// 8. Adversarial steps touch only their own parameter groups.
Outcome freezing_contracts() {
  SynthConfig sc;
  sc.n_classes = 8;
  sc.n_seen = 5;
  sc.n_unseen = 3;
  sc.samples_per_class = 20;
  sc.visual_dim = 16;
  sc.attr_dim = 6;
  sc.prototype_dim = 4;
  const ZslDataset ds = synth_generate(sc);
  Architecture a;
  a.visual_dim = ds.visual_dim();
  a.attr_dim = ds.attr_dim();
  a.n_seen_classes = ds.seen_classes.size();
  a.structure_dim = 12;
  a.latent_dim = 4;
  a.visual_hidden = {10};
  a.common_hidden = {10};
  a.visual_decoder_hidden = {10};
  a.semantic_decoder_hidden = {8};
  Rng init(31);
  HsvaModel<float> model(a, init);
  TrainSchedule sched;
  sched.batch_size = 16;
  sched.swd_directions = 16;
  sched.learning_rate = 1e-3;
  Trainer<float> trainer(model, sched, Rng(32));

  auto others = [](const std::vector<std::string>& keep) {
    std::vector<std::string> out;
    for (const auto& g : groups::kAll) {
      if (std::find(keep.begin(), keep.end(), g) == keep.end()) out.push_back(g);
    }
    return out;
  };
  const auto non_classifier = others(groups::kClassifiers);
  const auto non_encoder = others(groups::kTaskEncoders);
  Rng pick(33);
  int violations = 0;
  for (int t = 0; t < 100; ++t) {
    Rng shuffle(pick.next_u64());
    const auto batches = batch_iter(ds, 4 + pick.below(20), shuffle);
    const Batch& batch = batches[pick.below(batches.size())];
    const LossWeights w{pick.uniform(0.0, 0.3), pick.uniform(0.0, 3.0), pick.uniform(0.1, 12.0),
                        pick.uniform(0.0, 12.0)};
    trainer.step_joint(batch, w);
    std::string before = group_bytes(model, non_classifier);
    trainer.step_max_discrepancy(batch, w);
    violations += group_bytes(model, non_classifier) != before;
    before = group_bytes(model, non_encoder);
    trainer.step_min_discrepancy(batch, w, 1 + pick.below(3));
    violations += group_bytes(model, non_encoder) != before;
  }
  return {violations == 0, "100 batches, " + std::to_string(violations) + " frozen-group changes"};
}

}  // namespace
}  // namespace hsva

// Optional arguments pick criteria by number.
int main(int argc, char** argv) {
  using namespace hsva;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  report(1, "harmonic mean rows", harmonic_rows);
  report(2, "gradient suite", gradient_suite);
  report(3, "loss oracles", loss_oracles);
  report(4, "schedule", schedule_checks);
  report(5, "end-to-end synthetic CZSL", end_to_end);
  report(6, "ablation direction", ablation_direction);
  report(7, "CLI determinism", determinism);
  report(8, "freezing contracts", freezing_contracts);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
