#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "hsva/cli.hpp"
#include "test_support.hpp"

namespace hsva {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "hsva");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& body) {
  const fs::path p = dir / name;
  std::ofstream(p) << body;
  return p;
}

// Small enough that train + eval take well under a second.
const char* const kTinyRun = R"({
  "synth": {"n_classes": 6, "n_seen": 4, "n_unseen": 2, "samples_per_class": 12,
            "visual_dim": 10, "attr_dim": 5, "prototype_dim": 3},
  "arch": {"structure_dim": 8, "latent_dim": 3, "common_hidden": [8],
           "visual_decoder_hidden": [8], "semantic_decoder_hidden": [6]},
  "train": {"epochs": 2, "batch_size": 8, "swd_directions": 8},
  "eval": {"counts": {"unseen": 10, "gzsl_unseen": 10, "gzsl_seen": 5}, "classifier_epochs": 2},
  "seeds": [1]
})";

std::string expect_config_error(const std::string& body) {
  const auto dir = test::scratch_dir("cli_cfg_err");
  const auto cfg = write_config(dir, "c.json", body);
  const CliResult r = run({"train", "--config", cfg.string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 1) << r.err;
  return r.err;
}

TEST(Config, UnknownFieldIsNamedWithItsPath) {
  EXPECT_NE(expect_config_error(R"({"train": {"epoch": 3}})").find("train.epoch"), std::string::npos);
  EXPECT_NE(expect_config_error(R"({"train": {"lambda2": {"rate": 1, "stop": 3}}})").find("train.lambda2.stop"),
            std::string::npos);
  EXPECT_NE(expect_config_error(R"({"colour": 1})").find("colour"), std::string::npos);
}

TEST(Config, MistypedFieldIsNamed) {
  EXPECT_NE(expect_config_error(R"({"train": {"epochs": -1}})").find("train.epochs"), std::string::npos);
  EXPECT_NE(expect_config_error(R"({"eval": {"classifier_lr": "fast"}})").find("eval.classifier_lr"),
            std::string::npos);
  EXPECT_NE(expect_config_error(R"({"synth": {"visual_map": "cubic"}})").find("cubic"), std::string::npos);
  EXPECT_NE(expect_config_error(R"({"ablation": {"disable_sa": 1}})").find("ablation.disable_sa"),
            std::string::npos);
}

TEST(Config, InconsistentValuesAreRejected) {
  EXPECT_NE(expect_config_error(R"({"dataset": "somewhere", "synth": {}})").find("dataset"), std::string::npos);
  EXPECT_NE(expect_config_error(R"({"dataset": "no/such/dir"})").find("no/such/dir"), std::string::npos);
  EXPECT_NE(expect_config_error(R"({"seeds": []})").find("seeds"), std::string::npos);
  EXPECT_NE(expect_config_error(R"({"train": {"batch_size": 0}})").find("batch_size"), std::string::npos);
  expect_config_error("{ not json");
}

TEST(Config, RelativeDatasetPathResolvesAgainstConfigFile) {
  const auto dir = test::scratch_dir("cli_relpath");
  fs::create_directories(dir / "data");
  const RunConfig cfg = load_run_config(write_config(dir, "c.json", R"({"dataset": "data"})"));
  ASSERT_TRUE(cfg.dataset.has_value());
  EXPECT_EQ(fs::weakly_canonical(*cfg.dataset), fs::weakly_canonical(dir / "data"));
}

TEST(Config, JsonRoundTripAndHash) {
  const RunConfig a = parse_run_config(nlohmann::json::parse(kTinyRun));
  const RunConfig b = parse_run_config(nlohmann::json::parse(run_config_to_json(a).dump()));
  EXPECT_EQ(run_config_to_json(a).dump(), run_config_to_json(b).dump());
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  RunConfig moved = a;
  moved.out = "elsewhere";
  EXPECT_EQ(config_hash(moved), config_hash(a));
  RunConfig changed = a;
  changed.train.epochs = 3;
  EXPECT_NE(config_hash(changed), config_hash(a));
}

TEST(ExitCodes, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"fly"}).code, 1);
  EXPECT_EQ(run({"train", "--config", "/no/such/file.json"}).code, 1);
  EXPECT_EQ(run({"eval"}).code, 1);
  EXPECT_EQ(run({"train", "--seed", "minus-one"}).code, 1);
}

TEST(ExitCodes, RuntimeErrorIsTwo) {
  const auto dir = test::scratch_dir("cli_runtime");
  std::ofstream(dir / "bad.bin") << "not a checkpoint";
  const auto cfg = write_config(dir, "c.json", kTinyRun);
  const CliResult r =
      run({"eval", "--config", cfg.string(), "--checkpoint", (dir / "bad.bin").string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad magic"), std::string::npos) << r.err;
}

TEST(Synth, SameSeedWritesIdenticalFiles) {
  const auto dir = test::scratch_dir("cli_synth");
  const auto cfg = write_config(dir, "c.json", kTinyRun);
  ASSERT_EQ(run({"synth", "--config", cfg.string(), "--seed", "5", "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(run({"synth", "--config", cfg.string(), "--seed", "5", "--out", (dir / "b").string()}).code, 0);
  ASSERT_EQ(run({"synth", "--config", cfg.string(), "--seed", "6", "--out", (dir / "c").string()}).code, 0);
  for (const char* f : {"meta.json", "features.bin", "attributes.bin", "labels.bin"}) {
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  }
  EXPECT_NE(read_file(dir / "a" / "features.bin"), read_file(dir / "c" / "features.bin"));
  EXPECT_NO_THROW(load_dataset(dir / "a").validate());
}

TEST(Synth, SeedFlagNeedsASynthSection) {
  const auto dir = test::scratch_dir("cli_synth_ds");
  ASSERT_EQ(run({"synth", "--config", write_config(dir, "s.json", kTinyRun).string(), "--out",
                 (dir / "data").string()})
                .code,
            0);
  const auto cfg = write_config(dir, "c.json", R"({"dataset": "data"})");
  EXPECT_EQ(run({"synth", "--config", cfg.string(), "--seed", "3", "--out", (dir / "x").string()}).code, 1);
}

TEST(TrainEval, ArtifactsAreDeterministicAndWellFormed) {
  const auto dir = test::scratch_dir("cli_train");
  const auto cfg = write_config(dir, "c.json", kTinyRun);
  for (const char* run_dir : {"r1", "r2"}) {
    const auto out = (dir / run_dir).string();
    ASSERT_EQ(run({"train", "--config", cfg.string(), "--seed", "4", "--out", out}).code, 0);
    const CliResult e =
        run({"eval", "--config", cfg.string(), "--seed", "4", "--checkpoint", out + "/checkpoint.bin", "--out", out});
    ASSERT_EQ(e.code, 0) << e.err;
  }
  for (const char* f : {"curves.csv", "metrics.json", "latents.csv", "checkpoint.bin"}) {
    EXPECT_EQ(read_file(dir / "r1" / f), read_file(dir / "r2" / f)) << f;
  }

  const auto metrics = nlohmann::json::parse(read_file(dir / "r1" / "metrics.json"));
  ASSERT_TRUE(metrics.contains("czsl"));
  ASSERT_TRUE(metrics.contains("gzsl"));
  for (const char* key : {"protocol", "acc", "u", "s", "h", "per_class", "seed", "counts"}) {
    EXPECT_TRUE(metrics["czsl"].contains(key)) << key;
    EXPECT_TRUE(metrics["gzsl"].contains(key)) << key;
  }
  EXPECT_EQ(metrics["czsl"]["protocol"], "CZSL");
  EXPECT_EQ(metrics["czsl"]["per_class"].size(), 2u);
  EXPECT_EQ(metrics["gzsl"]["per_class"].size(), 6u);

  const std::string curves = read_file(dir / "r1" / "curves.csv");
  EXPECT_EQ(std::count(curves.begin(), curves.end(), '\n'), 3);

  std::istringstream latents(read_file(dir / "r1" / "latents.csv"));
  std::string header;
  std::getline(latents, header);
  EXPECT_EQ(header, "sample_id,class,seen,z0,z1,z2");

  const auto manifest = nlohmann::json::parse(read_file(dir / "r1" / "manifest.json"));
  EXPECT_TRUE(manifest.contains("config_hash"));
}

TEST(TrainEval, DifferentSeedsDiffer) {
  const auto dir = test::scratch_dir("cli_seed");
  const auto cfg = write_config(dir, "c.json", kTinyRun);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--seed", "1", "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--seed", "2", "--out", (dir / "b").string()}).code, 0);
  EXPECT_NE(read_file(dir / "a" / "curves.csv"), read_file(dir / "b" / "curves.csv"));
}

TEST(Gradcheck, PassesAndCorruptionIsCaught) {
  const auto dir = test::scratch_dir("cli_gradcheck");
  const CliResult ok = run({"gradcheck", "--out", dir.string()});
  EXPECT_EQ(ok.code, 0) << ok.out << ok.err;
  for (const auto& term : gradcheck_terms()) EXPECT_NE(ok.out.find(term), std::string::npos) << term;
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);

  const auto cfg = write_config(dir, "c.json", R"({"gradcheck": {"corrupt_term": "dis2"}})");
  const CliResult bad = run({"gradcheck", "--config", cfg.string(), "--out", dir.string()});
  EXPECT_EQ(bad.code, 2);
  std::istringstream lines(bad.out);
  std::string line;
  int failures = 0;
  while (std::getline(lines, line)) {
    if (line.find("FAIL") == std::string::npos) continue;
    ++failures;
    EXPECT_NE(line.find("dis2"), std::string::npos) << line;
  }
  EXPECT_EQ(failures, 1);
}

TEST(Gradcheck, UnknownCorruptTermIsAConfigError) {
  const auto dir = test::scratch_dir("cli_gradcheck_bad");
  const auto cfg = write_config(dir, "c.json", R"({"gradcheck": {"corrupt_term": "bogus"}})");
  const CliResult r = run({"gradcheck", "--config", cfg.string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("gradcheck.corrupt_term"), std::string::npos) << r.err;
}

TEST(Ablate, OneRowPerVariantAndSeedPlusMeans) {
  const auto dir = test::scratch_dir("cli_ablate");
  const auto cfg = write_config(dir, "c.json", kTinyRun);
  const CliResult r = run({"ablate", "--config", cfg.string(), "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(read_file(dir / "ablation.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "variant,seed,u,s,h,acc");
  std::vector<std::string> rows;
  while (std::getline(csv, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 8u);
  int full = 0;
  for (const auto& row : rows) full += row.rfind("full,1,", 0) == 0;
  EXPECT_EQ(full, 1);
  for (const char* v : {"full", "no_sa", "no_da_icoral", "no_icoral"}) {
    EXPECT_NE(std::find_if(rows.begin(), rows.end(),
                           [&](const std::string& row) { return row.rfind(std::string(v) + ",mean,", 0) == 0; }),
              rows.end())
        << v;
  }
}

}  // namespace
}  // namespace hsva
