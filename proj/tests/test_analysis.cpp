#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "aat/analysis.hpp"
#include "aat/errors.hpp"
#include "aat/ops.hpp"
#include "test_util.hpp"

namespace aat {
namespace {

using testing::random_tensor;

BackboneSpec small_spec() {
  BackboneSpec spec;
  spec.input_shape = {1, 8, 8};
  spec.conv_channels = {3};
  spec.kernel = 3;
  spec.latent_dim = 6;
  spec.num_classes = 3;
  return spec;
}

TEST(RescaleTest, RampMapsToUnitInterval) {
  std::vector<float> ramp(101);
  std::iota(ramp.begin(), ramp.end(), -50.0f);
  bool degenerate = true;
  const auto out = rescale_for_display(ramp, &degenerate);
  EXPECT_FALSE(degenerate);
  EXPECT_FLOAT_EQ(out.front(), 0.0f);
  EXPECT_FLOAT_EQ(out.back(), 1.0f);
  EXPECT_NEAR(out[50], 0.5f, 1e-6f);
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_GE(out[i], out[i - 1]);
}

TEST(RescaleTest, OutliersAreClippedBeforeScaling) {
  std::vector<float> v(200, 0.0f);
  for (std::size_t i = 0; i < v.size(); i += 2) v[i] = 1.0f;
  v[1] = 1000.0f;
  const auto out = rescale_for_display(v);
  double mean = 0, var = 0;
  for (float x : v) mean += x;
  mean /= 200.0;
  for (float x : v) var += (x - mean) * (x - mean);
  const double upper = mean + 3 * std::sqrt(var / 200.0);
  ASSERT_LT(upper, 1000.0);
  EXPECT_FLOAT_EQ(out[1], 1.0f);
  EXPECT_FLOAT_EQ(out[3], 0.0f);
  // Unclipped, the ordinary ones would sit at 1/1000.
  EXPECT_NEAR(out[0], 1.0 / upper, 1e-6);
  for (float x : out) {
    EXPECT_GE(x, 0.0f);
    EXPECT_LE(x, 1.0f);
  }
}

TEST(RescaleTest, ConstantInputIsFlaggedAndMidGrey) {
  const std::vector<float> flat(16, 3.0f);
  bool degenerate = false;
  const auto out = rescale_for_display(flat, &degenerate);
  EXPECT_TRUE(degenerate);
  for (float x : out) EXPECT_EQ(x, 0.5f);
}

TEST(GradVisualTest, MatchesDirectGradientAndLeavesModelClean) {
  const auto m = Model::init(small_spec(), 1);
  Rng rng(2);
  const auto x = random_tensor<float>({1, 1, 8, 8}, rng, 0, 1, false);
  const auto g = input_gradient(m, x, 2, Way::kRobust);

  Tensor<float> input(x.shape(), std::vector<float>(x.values().begin(), x.values().end()), true);
  backward(ops::cross_entropy(m.frozen().forward_way(input, Way::kRobust), Labels{2}));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_FLOAT_EQ(g[i], input.grad()[i]);

  for (const auto& p : m.parameters()) {
    if (p.tensor.has_grad()) {
      for (float v : p.tensor.grad()) ASSERT_EQ(v, 0.0f) << p.name;
    }
  }
  const auto art = grad_visual(m, x, 2, Way::kRobust, 4);
  EXPECT_EQ(art.pixels.size(), 64u);
  EXPECT_EQ(art.provenance.sample_id, 4u);
  EXPECT_EQ(art.provenance.way, "robust");
  EXPECT_EQ(art.pixels, rescale_for_display(g));
}

TEST(GradVisualTest, RejectsBatchedInput) {
  const auto m = Model::init(small_spec(), 1);
  EXPECT_THROW(input_gradient(m, Tensor<float>::zeros({2, 1, 8, 8}), 0, Way::kStandard), DimensionError);
}

Tensor<float> target_for(const Model& m, Branch branch, std::uint64_t seed) {
  Rng rng(seed);
  const auto x = random_tensor<float>({1, 1, 8, 8}, rng, 0, 1, false);
  NoGradGuard no_grad;
  return m.encode(x, branch);
}

TEST(InversionTest, ZeroStepsReturnsStartingNoise) {
  const auto m = Model::init(small_spec(), 3);
  InversionOptions options;
  options.steps = 0;
  options.seed = 4;
  const auto r = invert_representation(m, target_for(m, Branch::kRobust, 5), Branch::kRobust, options);
  EXPECT_EQ(r.initial_distance, r.final_distance);
  EXPECT_EQ(r.image.pixels.size(), 64u);
  Rng rng(4);
  for (float v : r.image.pixels) EXPECT_FLOAT_EQ(v, static_cast<float>(rng.uniform()));
}

TEST(InversionTest, DistanceNeverIncreases) {
  const auto m = Model::init(small_spec(), 6);
  InversionOptions options;
  options.steps = 150;
  options.lr = 0.5;
  options.log_every = 10;
  const auto r = invert_representation(m, target_for(m, Branch::kNonRobust, 7), Branch::kNonRobust, options);
  EXPECT_LT(r.final_distance, r.initial_distance);
  ASSERT_GE(r.history.size(), 2u);
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i].second, r.history[i - 1].second);
  for (float v : r.image.pixels) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_EQ(r.image.provenance.operation, "invert");
}

TEST(InversionTest, RejectsWrongTargetWidth) {
  const auto m = Model::init(small_spec(), 6);
  EXPECT_THROW(invert_representation(m, Tensor<float>::zeros({1, 5}), Branch::kRobust, InversionOptions{}),
               DimensionError);
}

TEST(RelativeDistanceTest, MatchesDefinition) {
  const std::vector<float> a{1, 2, 2};
  const std::vector<float> b{1, 0, 0};
  EXPECT_DOUBLE_EQ(relative_distance(a, b), 8.0);
  EXPECT_DOUBLE_EQ(relative_distance(b, b), 0.0);
}

TEST(ImageEncodingTest, GreyscaleHeaderAndPixels) {
  ImageArtifact img;
  img.height = 2;
  img.width = 3;
  img.pixels = {0.0f, 0.5f, 1.0f, 0.25f, 0.999f, 0.002f};
  const auto bytes = encode_image(img);
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 6);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())), header);
  const std::vector<std::uint8_t> px(bytes.begin() + static_cast<long>(header.size()), bytes.end());
  EXPECT_EQ(px, (std::vector<std::uint8_t>{0, 128, 255, 64, 255, 1}));
}

TEST(ImageEncodingTest, ColourUsesInterleavedPpm) {
  ImageArtifact img;
  img.channels = 3;
  img.height = 1;
  img.width = 2;
  img.pixels = {1, 0, 0, 1, 0, 0};  // CHW: red plane, green plane, blue plane
  const auto bytes = encode_image(img);
  const std::string header = "P6\n2 1\n255\n";
  const std::vector<std::uint8_t> px(bytes.begin() + static_cast<long>(header.size()), bytes.end());
  EXPECT_EQ(px, (std::vector<std::uint8_t>{255, 0, 0, 0, 255, 0}));
}

}  // namespace
}  // namespace aat
