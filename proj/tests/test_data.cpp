#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "hsva/data.hpp"
#include "test_support.hpp"

namespace hsva {
namespace {

SynthConfig small_synth() {
  SynthConfig cfg;
  cfg.n_classes = 6;
  cfg.n_seen = 4;
  cfg.n_unseen = 2;
  cfg.samples_per_class = 10;
  cfg.visual_dim = 12;
  cfg.attr_dim = 5;
  cfg.prototype_dim = 3;
  return cfg;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

TEST(Synth, DefaultShapesAndSplits) {
  const ZslDataset ds = synth_generate(SynthConfig{});
  EXPECT_EQ(ds.n_samples(), 2000u);
  EXPECT_EQ(ds.n_classes(), 20u);
  EXPECT_EQ(ds.visual_dim(), 256u);
  EXPECT_EQ(ds.attr_dim(), 32u);
  EXPECT_EQ(ds.seen_classes.size(), 15u);
  EXPECT_EQ(ds.unseen_classes.size(), 5u);
  EXPECT_EQ(ds.train_idx.size() + ds.test_seen_idx.size(), 1500u);
  EXPECT_EQ(ds.test_unseen_idx.size(), 500u);
  EXPECT_NO_THROW(ds.validate());
  EXPECT_LE(ds.features.maxCoeff(), 1.0f);
  EXPECT_GE(ds.features.minCoeff(), -1.0f);
  EXPECT_GT(ds.attributes.minCoeff(), 0.0f);
}

TEST(Synth, SeedDeterminesOutput) {
  SynthConfig cfg = small_synth();
  EXPECT_TRUE(synth_generate(cfg) == synth_generate(cfg));
  SynthConfig other = cfg;
  other.seed += 1;
  EXPECT_FALSE(synth_generate(cfg) == synth_generate(other));
}

TEST(Synth, NoiselessAttributesArePairwiseDistinct) {
  SynthConfig cfg;
  cfg.attribute_noise = 0.0;
  const ZslDataset ds = synth_generate(cfg);
  for (std::size_t i = 0; i < ds.n_classes(); ++i) {
    for (std::size_t j = i + 1; j < ds.n_classes(); ++j) {
      const double d = (ds.attributes.row(static_cast<Eigen::Index>(i)) - ds.attributes.row(static_cast<Eigen::Index>(j)))
                           .cast<double>()
                           .norm();
      EXPECT_GT(d, 1e-9) << i << " vs " << j;
    }
  }
}

// Nearest class mean on the raw visual features: the seen classes of the
// default benchmark must be far above chance (1/15), or nothing downstream is
// meaningful. Default noise keeps them well short of perfectly separable.
TEST(Synth, DefaultSeenClassesAreSeparableByNearestMean) {
  const ZslDataset ds = synth_generate(SynthConfig{});
  std::vector<Eigen::VectorXd> means(ds.n_classes(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.visual_dim())));
  std::vector<int> counts(ds.n_classes(), 0);
  for (auto i : ds.train_idx) {
    means[ds.labels[i]] += ds.features.row(i).transpose().cast<double>();
    ++counts[ds.labels[i]];
  }
  int correct = 0;
  for (auto i : ds.test_seen_idx) {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (auto c : ds.seen_classes) {
      const double d = (ds.features.row(i).transpose().cast<double>() - means[c] / counts[c]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    correct += best == ds.labels[i];
  }
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(ds.test_seen_idx.size()), 0.6);
}

TEST(Synth, RejectsInconsistentConfig) {
  SynthConfig cfg = small_synth();
  cfg.n_seen = 5;
  EXPECT_THROW(synth_generate(cfg), ConfigError);
  cfg = small_synth();
  cfg.train_fraction = 1.0;
  EXPECT_THROW(synth_generate(cfg), ConfigError);
  cfg = small_synth();
  cfg.visual_dim = 0;
  EXPECT_THROW(synth_generate(cfg), ConfigError);
  EXPECT_THROW(synth_map_from_string("cubic"), ConfigError);
}

TEST(Container, RoundTripIsBitwise) {
  const ZslDataset ds = synth_generate(small_synth());
  const auto dir = test::scratch_dir("container");
  save_dataset(ds, dir);
  EXPECT_TRUE(load_dataset(dir) == ds);
}

TEST(Container, MissingDirectoryAndFiles) {
  const auto dir = test::scratch_dir("container_missing");
  EXPECT_THROW(load_dataset(dir / "nope"), DataError);
  save_dataset(synth_generate(small_synth()), dir);
  std::filesystem::remove(dir / "labels.bin");
  try {
    load_dataset(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("labels.bin"), std::string::npos);
  }
}

TEST(Validate, NamesTheBrokenInvariant) {
  const ZslDataset good = synth_generate(small_synth());
  auto expect_error = [](const ZslDataset& ds, const std::string& needle) {
    try {
      ds.validate();
      ADD_FAILURE() << "expected DataError mentioning " << needle;
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  ZslDataset ds = good;
  ds.unseen_classes.push_back(ds.seen_classes[0]);
  expect_error(ds, "both seen and unseen");

  ds = good;
  ds.test_seen_idx.push_back(ds.train_idx[0]);
  expect_error(ds, "train_idx and test_seen_idx");

  ds = good;
  ds.train_idx.push_back(ds.test_unseen_idx[0]);
  expect_error(ds, "train sample");

  ds = good;
  ds.train_idx.push_back(ds.train_idx[0]);
  expect_error(ds, "repeats");

  ds = good;
  ds.labels[0] = 99;
  expect_error(ds, "labels");

  ds = good;
  ds.features(0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(ds.validate(), Error);
}

// Random byte flips and truncations of a valid container either load a
// dataset that passes validation or raise a library Error; never anything
// else.
TEST(Container, MutationFuzz) {
  const auto base = test::scratch_dir("fuzz_base");
  save_dataset(synth_generate(small_synth()), base);
  const std::vector<std::string> files = {"meta.json", "features.bin", "attributes.bin", "labels.bin"};
  Rng rng(99);
  int rejected = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto dir = test::scratch_dir("fuzz_case");
    for (const auto& f : files) std::filesystem::copy_file(base / f, dir / f);
    const auto& target = files[rng.below(files.size())];
    std::string bytes = read_file(dir / target);
    switch (rng.below(3)) {
      case 0:
        bytes[rng.below(bytes.size())] = static_cast<char>(rng.below(256));
        break;
      case 1:
        bytes.resize(rng.below(bytes.size()));
        break;
      default:
        bytes += static_cast<char>(rng.below(256));
        break;
    }
    write_file(dir / target, bytes);
    try {
      load_dataset(dir).validate();
    } catch (const Error&) {
      ++rejected;
    }
  }
  EXPECT_GT(rejected, 0);
}

TEST(Normalize, TrainRangeIsUnitInterval) {
  ZslDataset ds = synth_generate(small_synth());
  minmax_normalize_features(ds);
  const Matrix train = gather_rows(ds.features, ds.train_idx);
  EXPECT_NEAR(train.minCoeff(), 0.0f, 1e-6f);
  EXPECT_NEAR(train.maxCoeff(), 1.0f, 1e-6f);
  EXPECT_NO_THROW(ds.validate());
}

TEST(BatchIter, CoversTrainExactlyOnce) {
  const ZslDataset ds = synth_generate(small_synth());
  Rng rng(3);
  const auto batches = batch_iter(ds, 7, rng);
  std::multiset<std::uint32_t> ids;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& batch = batches[b];
    if (b + 1 < batches.size()) EXPECT_EQ(batch.size(), 7u);
    EXPECT_GE(batch.size(), 1u);
    EXPECT_EQ(batch.x.rows(), static_cast<Eigen::Index>(batch.size()));
    EXPECT_EQ(batch.a.rows(), static_cast<Eigen::Index>(batch.size()));
    ids.insert(batch.sample_ids.begin(), batch.sample_ids.end());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto row = batch.sample_ids[i];
      EXPECT_EQ(ds.seen_classes[batch.labels[i]], ds.labels[row]);
      EXPECT_EQ(batch.x.row(static_cast<Eigen::Index>(i)), ds.features.row(row));
      EXPECT_EQ(batch.a.row(static_cast<Eigen::Index>(i)), ds.attributes.row(ds.labels[row]));
    }
    EXPECT_EQ(batch.unseen_ids, ds.unseen_classes);
    EXPECT_EQ(batch.unseen_attributes.rows(), 2);
  }
  EXPECT_EQ(ids, std::multiset<std::uint32_t>(ds.train_idx.begin(), ds.train_idx.end()));
}

TEST(BatchIter, ShufflesDeterministicallyPerSeed) {
  const ZslDataset ds = synth_generate(small_synth());
  Rng a(4);
  Rng b(4);
  Rng c(5);
  const auto ba = batch_iter(ds, 8, a);
  EXPECT_EQ(ba[0].sample_ids, batch_iter(ds, 8, b)[0].sample_ids);
  EXPECT_NE(ba[0].sample_ids, batch_iter(ds, 8, c)[0].sample_ids);
}

TEST(BatchIter, SubsamplesUnseenClassesWithoutReplacement) {
  SynthConfig cfg = small_synth();
  cfg.n_classes = 10;
  cfg.n_unseen = 6;
  const ZslDataset ds = synth_generate(cfg);
  Rng rng(6);
  for (const auto& batch : batch_iter(ds, 5, rng, 3)) {
    ASSERT_EQ(batch.unseen_ids.size(), 3u);
    EXPECT_EQ(std::set<std::uint32_t>(batch.unseen_ids.begin(), batch.unseen_ids.end()).size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NE(std::find(ds.unseen_classes.begin(), ds.unseen_classes.end(), batch.unseen_ids[k]),
                ds.unseen_classes.end());
      EXPECT_EQ(batch.unseen_attributes.row(static_cast<Eigen::Index>(k)), ds.attributes.row(batch.unseen_ids[k]));
    }
  }
}

TEST(BatchIter, RejectsZeroBatchSize) {
  const ZslDataset ds = synth_generate(small_synth());
  Rng rng(7);
  EXPECT_THROW(batch_iter(ds, 0, rng), ConfigError);
}

}  // namespace
}  // namespace hsva
