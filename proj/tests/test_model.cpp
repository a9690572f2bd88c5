#include <gtest/gtest.h>

#include <fstream>

#include "hsva/model.hpp"
#include "test_support.hpp"

namespace hsva {
namespace {

using test::random_matrix;

Architecture tiny_arch() {
  Architecture a;
  a.visual_dim = 6;
  a.attr_dim = 4;
  a.n_seen_classes = 3;
  a.structure_dim = 5;
  a.latent_dim = 2;
  a.visual_hidden = {7};
  a.semantic_hidden = {};
  a.common_hidden = {4};
  a.visual_decoder_hidden = {5};
  a.semantic_decoder_hidden = {3};
  a.classifier_hidden = {};
  return a;
}

// Dense layer from named parameters, computed with loops.
MatrixD loop_layer(const ParamStore<double>& store, const std::string& prefix, int index, const MatrixD& x,
                   bool relu) {
  const std::string base = prefix + "." + std::to_string(index) + ".";
  const MatrixD& w = store.at(*store.find(base + "weight")).value;
  const MatrixD& b = store.at(*store.find(base + "bias")).value;
  MatrixD y(x.rows(), w.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index o = 0; o < w.cols(); ++o) {
      double acc = b(0, o);
      for (Eigen::Index k = 0; k < x.cols(); ++k) acc += x(i, k) * w(k, o);
      y(i, o) = relu ? std::max(acc, 0.0) : acc;
    }
  }
  return y;
}

TEST(Architecture, JsonRoundTripAndValidation) {
  const Architecture a = tiny_arch();
  EXPECT_EQ(architecture_from_json(architecture_to_json(a)), a);
  Architecture bad = a;
  bad.latent_dim = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = a;
  bad.n_seen_classes = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(HsvaModel, EveryParameterBelongsToAKnownGroup) {
  Rng rng(1);
  HsvaModel<double> model(tiny_arch(), rng);
  const auto seen = model.params().groups();
  EXPECT_EQ(seen.size(), groups::kAll.size());
  for (const auto& p : model.params()) {
    EXPECT_NE(std::find(groups::kAll.begin(), groups::kAll.end(), p.group), groups::kAll.end()) << p.name;
  }
}

TEST(HsvaModel, ForwardMatchesLoopOracle) {
  Rng rng(2);
  HsvaModel<double> model(tiny_arch(), rng);
  for (auto& p : model.params()) p.value = random_matrix(rng, p.value.rows(), p.value.cols());
  const auto& s = model.params();
  const MatrixD x = random_matrix(rng, 5, 6);
  const MatrixD a = random_matrix(rng, 5, 4);

  const MatrixD sx = loop_layer(s, "Ex", 1, loop_layer(s, "Ex", 0, x, true), true);
  EXPECT_TRUE(model.encode_visual(x).isApprox(sx, 1e-12));
  const MatrixD sa = loop_layer(s, "Ea", 0, a, true);
  EXPECT_TRUE(model.encode_semantic(a).isApprox(sa, 1e-12));

  const MatrixD trunk = loop_layer(s, "Ez.trunk", 0, sx, true);
  const auto gauss = model.encode_common(sx);
  EXPECT_TRUE(gauss.mu.isApprox(loop_layer(s, "Ez.mu", 0, trunk, false), 1e-12));
  EXPECT_TRUE(gauss.logvar.isApprox(loop_layer(s, "Ez.logvar", 0, trunk, false), 1e-12));

  const MatrixD z = random_matrix(rng, 5, 2);
  EXPECT_TRUE(model.decode_visual(z).isApprox(loop_layer(s, "Dx", 1, loop_layer(s, "Dx", 0, z, true), false), 1e-12));
  EXPECT_TRUE(
      model.decode_semantic(z).isApprox(loop_layer(s, "Da", 1, loop_layer(s, "Da", 0, z, true), false), 1e-12));
  EXPECT_TRUE(model.classify(ClassifierId::kFirst, sx).isApprox(loop_layer(s, "Cls1", 0, sx, false), 1e-12));
  EXPECT_TRUE(model.classify(ClassifierId::kSecond, sx).isApprox(loop_layer(s, "Cls2", 0, sx, false), 1e-12));
}

TEST(HsvaModel, StructureEmbeddingsAreNonNegative) {
  Rng rng(3);
  HsvaModel<double> model(tiny_arch(), rng);
  EXPECT_GE(model.encode_visual(random_matrix(rng, 20, 6, -3.0, 3.0)).minCoeff(), 0.0);
  EXPECT_GE(model.encode_semantic(random_matrix(rng, 20, 4, -3.0, 3.0)).minCoeff(), 0.0);
}

TEST(HsvaModel, CopyClassifierMakesOutputsIdentical) {
  Rng rng(4);
  HsvaModel<double> model(tiny_arch(), rng);
  const MatrixD s = random_matrix(rng, 4, 5);
  EXPECT_FALSE(model.classify(ClassifierId::kFirst, s).isApprox(model.classify(ClassifierId::kSecond, s)));
  model.copy_classifier_1_to_2();
  EXPECT_EQ(model.classify(ClassifierId::kFirst, s), model.classify(ClassifierId::kSecond, s));
}

TEST(HsvaModel, RejectsWrongInputWidth) {
  Rng rng(5);
  HsvaModel<double> model(tiny_arch(), rng);
  EXPECT_THROW(model.encode_visual(MatrixD::Zero(2, 4)), ShapeError);
}

TEST(HsvaModel, SameSeedSameWeights) {
  Rng r1(6);
  Rng r2(6);
  HsvaModel<float> a(tiny_arch(), r1);
  HsvaModel<float> b(tiny_arch(), r2);
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params().at(i).value, b.params().at(i).value);
}

TEST(Reparameterize, SampleMomentsMatchGaussian) {
  Rng rng(7);
  const Eigen::Index n = 200000;
  GaussianParams<double> g{MatrixD::Zero(n, 2), MatrixD::Zero(n, 2)};
  g.mu.col(0).setConstant(1.5);
  g.mu.col(1).setConstant(-0.5);
  g.logvar.col(0).setConstant(std::log(4.0));
  g.logvar.col(1).setConstant(std::log(0.25));
  const auto s = reparameterize(g, rng);
  for (int j = 0; j < 2; ++j) {
    const double mean = s.z.col(j).mean();
    const double var = (s.z.col(j).array() - mean).square().sum() / static_cast<double>(n - 1);
    EXPECT_NEAR(mean, g.mu(0, j), 0.01);
    EXPECT_NEAR(var, std::exp(g.logvar(0, j)), 0.02 * std::exp(g.logvar(0, j)));
  }
  EXPECT_TRUE(s.z.isApprox(g.mu + (0.5 * g.logvar.array()).exp().matrix().cwiseProduct(s.noise)));
}

TEST(Reparameterize, GradientReachesMeanAndLogVarianceOnly) {
  ParamStore<double> store;
  store.add("mu", "g", MatrixD::Constant(1, 1, 0.3));
  store.add("lv", "g", MatrixD::Constant(1, 1, 0.8));
  Graph<double> g;
  MatrixD noise(1, 1);
  noise << 1.7;
  Var z = reparameterize(g, {g.parameter(store, 0), g.parameter(store, 1)}, noise);
  g.backward(ops::sum(g, z), store);
  EXPECT_DOUBLE_EQ(store.at(0).grad(0, 0), 1.0);
  EXPECT_NEAR(store.at(1).grad(0, 0), 0.5 * std::exp(0.4) * 1.7, 1e-14);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(8);
  HsvaModel<float> model(tiny_arch(), rng);
  const auto path = test::scratch_dir("ckpt") / "model.bin";
  save_checkpoint(model, path);
  const HsvaModel<float> loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.architecture(), model.architecture());
  ASSERT_EQ(loaded.params().size(), model.params().size());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    EXPECT_EQ(loaded.params().at(i).name, model.params().at(i).name);
    EXPECT_EQ(loaded.params().at(i).group, model.params().at(i).group);
    EXPECT_EQ(loaded.params().at(i).value, model.params().at(i).value);
  }
  const Matrix x = random_matrix(rng, 3, 6).cast<float>();
  EXPECT_EQ(loaded.encode_visual(x), model.encode_visual(x));
}

TEST(Checkpoint, CorruptFilesRaiseDataError) {
  Rng rng(9);
  HsvaModel<float> model(tiny_arch(), rng);
  const auto dir = test::scratch_dir("ckpt_bad");
  save_checkpoint(model, dir / "good.bin");
  std::ifstream in(dir / "good.bin", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    return dir / name;
  };
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(load_checkpoint(write("magic.bin", magic)), DataError);
  EXPECT_THROW(load_checkpoint(write("truncated.bin", bytes.substr(0, bytes.size() - 4))), DataError);
  EXPECT_THROW(load_checkpoint(write("trailing.bin", bytes + "xx")), DataError);
  EXPECT_THROW(load_checkpoint(write("short.bin", bytes.substr(0, 10))), DataError);
  EXPECT_THROW(load_checkpoint(dir / "missing.bin"), Error);
}

}  // namespace
}  // namespace hsva
