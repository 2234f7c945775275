#include <gtest/gtest.h>

#include <cmath>

#include "aat/attack.hpp"
#include "aat/errors.hpp"
#include "aat/ops.hpp"
#include "test_util.hpp"

namespace aat {
namespace {

using testing::random_tensor;

BackboneSpec small_spec() {
  BackboneSpec spec;
  spec.input_shape = {1, 12, 12};
  spec.conv_channels = {4};
  spec.kernel = 3;
  spec.latent_dim = 8;
  spec.num_classes = 4;
  return spec;
}

struct Fixture {
  Model model = Model::init(small_spec(), 11);
  Tensor<float> x;
  Labels y{0, 1, 2, 3, 0, 1, 2, 3};
  Fixture() {
    Rng rng(12);
    x = random_tensor<float>({8, 1, 12, 12}, rng, 0, 1, false);
  }
};

std::vector<float> copy_values(const Tensor<float>& t) { return {t.values().begin(), t.values().end()}; }

float way_loss(const Model& m, const Tensor<float>& x, const Labels& y, Way way) {
  NoGradGuard no_grad;
  return ops::cross_entropy(m.forward_way(x, way), y, ops::Reduction::kSum).item();
}

TEST(AttackTest, LinfConstraintsHoldForEverySample) {
  Fixture f;
  const AttackConfig cfg{Norm::kLinf, 0.05, 0.02, 7};
  for (auto way : {Way::kStandard, Way::kRobust, Way::kNonRobust}) {
    const auto adv = pgd(f.model, f.x, f.y, way, cfg);
    for (std::size_t i = 0; i < adv.numel(); ++i) {
      ASSERT_LE(std::abs(adv.values()[i] - f.x.values()[i]), 0.05f + 1e-6f);
      ASSERT_GE(adv.values()[i], 0.0f);
      ASSERT_LE(adv.values()[i], 1.0f);
    }
  }
}

TEST(AttackTest, L2ConstraintsHoldForEverySample) {
  Fixture f;
  const AttackConfig cfg{Norm::kL2, 0.3, 0.2, 10};
  const auto adv = pgd(f.model, f.x, f.y, Way::kStandard, cfg);
  const auto norms = perturbation_norms(f.x, adv, Norm::kL2);
  std::size_t at_boundary = 0;
  for (double n : norms) {
    EXPECT_LE(n, 0.3 * (1 + 1e-5));
    at_boundary += n > 0.29 ? 1 : 0;
  }
  EXPECT_GT(at_boundary, 0u);
  for (float v : adv.values()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}

TEST(AttackTest, ZeroBudgetOrZeroStepsIsIdentity) {
  Fixture f;
  const auto a = pgd(f.model, f.x, f.y, Way::kStandard, AttackConfig{Norm::kL2, 0.0, 0.01, 10});
  const auto b = pgd(f.model, f.x, f.y, Way::kStandard, AttackConfig{Norm::kLinf, 0.1, 0.01, 0});
  EXPECT_EQ(copy_values(a), copy_values(f.x));
  EXPECT_EQ(copy_values(b), copy_values(f.x));
}

TEST(AttackTest, LeavesModelUntouched) {
  Fixture f;
  std::vector<float> before;
  for (const auto& p : f.model.parameters()) {
    const auto v = copy_values(p.tensor);
    before.insert(before.end(), v.begin(), v.end());
  }
  pgd(f.model, f.x, f.y, Way::kStandard, AttackConfig::mnist_test());
  std::vector<float> after;
  for (const auto& p : f.model.parameters()) {
    EXPECT_FALSE(p.tensor.has_grad() && std::any_of(p.tensor.grad().begin(), p.tensor.grad().end(),
                                                     [](float g) { return g != 0.0f; }))
        << p.name;
    const auto v = copy_values(p.tensor);
    after.insert(after.end(), v.begin(), v.end());
  }
  EXPECT_EQ(before, after);
}

TEST(AttackTest, ReturnsDetachedConstant) {
  Fixture f;
  const auto adv = pgd(f.model, f.x, f.y, Way::kStandard, AttackConfig{Norm::kLinf, 0.1, 0.05, 3});
  EXPECT_TRUE(adv.is_leaf());
  EXPECT_FALSE(adv.requires_grad());
}

TEST(AttackTest, IncreasesTargetedWayLoss) {
  Fixture f;
  for (auto way : {Way::kStandard, Way::kRobust, Way::kNonRobust}) {
    const auto adv = pgd(f.model, f.x, f.y, way, AttackConfig{Norm::kLinf, 0.1, 0.02, 10});
    EXPECT_GT(way_loss(f.model, adv, f.y, way), way_loss(f.model, f.x, f.y, way));
  }
}

TEST(AttackTest, DeterministicAndReentrant) {
  Fixture f;
  const auto cfg = AttackConfig{Norm::kL2, 0.5, 0.1, 5};
  const auto a = pgd(f.model, f.x, f.y, Way::kNonRobust, cfg);
  const auto b = pgd(f.model, f.x, f.y, Way::kNonRobust, cfg);
  EXPECT_EQ(copy_values(a), copy_values(b));
}

// Input gradient of the summed loss, taken directly from the model.
std::vector<float> summed_loss_gradient(const Model& m, const Tensor<float>& x, const Labels& y, Way way) {
  Tensor<float> input(x.shape(), copy_values(x), true);
  const auto frozen = m.frozen();
  backward(ops::cross_entropy(frozen.forward_way(input, way), y, ops::Reduction::kSum));
  return {input.grad().begin(), input.grad().end()};
}

TEST(AttackTest, SingleLinfStepIsSignedGradientClippedToBudget) {
  Fixture f;
  AttackConfig cfg{Norm::kLinf, 0.03, 0.5, 1};
  cfg.clamp = false;
  const auto g = summed_loss_gradient(f.model, f.x, f.y, Way::kStandard);
  const auto adv = pgd(f.model, f.x, f.y, Way::kStandard, cfg);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const float expected = g[i] > 0 ? 0.03f : (g[i] < 0 ? -0.03f : 0.0f);
    ASSERT_NEAR(adv.values()[i] - f.x.values()[i], expected, 1e-6f);
  }
}

TEST(AttackTest, SingleL2StepFollowsNormalizedGradient) {
  Fixture f;
  AttackConfig cfg{Norm::kL2, 10.0, 0.07, 1};
  cfg.clamp = false;
  const auto g = summed_loss_gradient(f.model, f.x, f.y, Way::kRobust);
  const auto adv = pgd(f.model, f.x, f.y, Way::kRobust, cfg);
  const std::size_t d = 144;
  for (std::size_t n = 0; n < 8; ++n) {
    double norm = 0;
    for (std::size_t i = 0; i < d; ++i) norm += static_cast<double>(g[n * d + i]) * g[n * d + i];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t k = n * d + i;
      ASSERT_NEAR(adv.values()[k] - f.x.values()[k], 0.07 * g[k] / norm, 1e-6);
    }
  }
}

TEST(AttackTest, RandomStartNeedsGeneratorAndIsSeeded) {
  Fixture f;
  AttackConfig cfg{Norm::kLinf, 0.1, 0.02, 3};
  cfg.random_start = true;
  EXPECT_THROW(pgd(f.model, f.x, f.y, Way::kStandard, cfg), UsageError);
  Rng a(5), b(5);
  EXPECT_EQ(copy_values(pgd(f.model, f.x, f.y, Way::kStandard, cfg, &a)),
            copy_values(pgd(f.model, f.x, f.y, Way::kStandard, cfg, &b)));
}

TEST(AttackTest, PseudoLabelsMatchArgmax) {
  Fixture f;
  const auto labels = pseudo_label(f.model, f.x, f.y, Way::kStandard);
  NoGradGuard no_grad;
  const auto pred = ops::argmax_rows(f.model.forward_way(f.x, Way::kStandard));
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < f.y.size(); ++i) {
    EXPECT_EQ(labels.predicted[i], pred[i]);
    EXPECT_EQ(labels.misclassified[i], pred[i] != f.y[i]);
    wrong += pred[i] != f.y[i] ? 1 : 0;
  }
  EXPECT_EQ(labels.count, wrong);
}

TEST(AttackTest, PerturbationNorms) {
  const auto x = Tensor<float>({2, 1, 1, 2}, {0, 0, 0.5f, 0.5f});
  const auto a = Tensor<float>({2, 1, 1, 2}, {0.3f, 0.4f, 0.5f, 0.4f});
  const auto l2 = perturbation_norms(x, a, Norm::kL2);
  const auto linf = perturbation_norms(x, a, Norm::kLinf);
  EXPECT_NEAR(l2[0], 0.5, 1e-6);
  EXPECT_NEAR(l2[1], 0.1, 1e-6);
  EXPECT_NEAR(linf[0], 0.4, 1e-6);
  EXPECT_NEAR(linf[1], 0.1, 1e-6);
}

TEST(AttackTest, ConfigValidation) {
  EXPECT_THROW((AttackConfig{Norm::kL2, -0.1, 0.01, 1}).validate(), ValidationError);
  EXPECT_THROW(parse_norm("l1"), ValidationError);
  EXPECT_EQ(parse_norm("linf"), Norm::kLinf);
  EXPECT_EQ(AttackConfig::mnist_train().steps, 5u);
  EXPECT_EQ(AttackConfig::mnist_test().steps, 10u);
  EXPECT_DOUBLE_EQ(AttackConfig::cifar_train().epsilon, 8.0 / 255.0);
}

}  // namespace
}  // namespace aat
