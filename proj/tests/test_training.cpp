#include <gtest/gtest.h>

#include <cmath>

#include "aat/errors.hpp"
#include "aat/evaluation.hpp"
#include "aat/ops.hpp"
#include "aat/run.hpp"
#include "aat/training.hpp"
#include "test_util.hpp"

namespace aat {
namespace {

using testing::random_tensor;

BackboneSpec small_spec() {
  BackboneSpec spec;
  spec.input_shape = {1, 10, 10};
  spec.conv_channels = {3};
  spec.kernel = 3;
  spec.latent_dim = 8;
  spec.num_classes = 3;
  return spec;
}

Dataset random_dataset(std::size_t n, std::uint64_t seed) {
  Dataset d;
  d.sample_shape = {1, 10, 10};
  d.num_classes = 3;
  Rng rng(seed);
  for (std::size_t i = 0; i < n * 100; ++i) d.images.push_back(static_cast<float>(rng.uniform()));
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(rng.below(3)));
  return d;
}

std::vector<float> flat_params(const Model& m) {
  std::vector<float> out;
  for (const auto& p : m.parameters()) out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

std::vector<float> flat_grads(const Model& m) {
  std::vector<float> out;
  for (const auto& p : m.parameters()) {
    if (p.tensor.has_grad()) {
      out.insert(out.end(), p.tensor.grad().begin(), p.tensor.grad().end());
    } else {
      out.insert(out.end(), p.tensor.numel(), 0.0f);
    }
  }
  return out;
}

const AttackConfig kStrong{Norm::kLinf, 0.3, 0.1, 5};

struct Batch3 {
  Tensor<float> x;
  Labels y;
};

Batch3 make_batch(std::uint64_t seed, std::size_t n = 12) {
  Rng rng(seed);
  Batch3 b{random_tensor<float>({n, 1, 10, 10}, rng, 0, 1, false), {}};
  for (std::size_t i = 0; i < n; ++i) b.y.push_back(static_cast<int>(rng.below(3)));
  return b;
}

TEST(LossTest, StOnlyEqualsLossSt) {
  const auto m = Model::init(small_spec(), 1);
  const auto b = make_batch(2);
  const auto total = total_loss(m, b.x, b.y, LossConfig::standard(), kStrong);
  EXPECT_EQ(total.total.item(), loss_st(m, b.x, b.y).item());
}

TEST(LossTest, LossStIsSumOfThreeWayMeans) {
  const auto m = Model::init(small_spec(), 1);
  const auto b = make_batch(3);
  const auto l = m.forward_all(b.x);
  const double expected = ops::cross_entropy(l.standard, b.y).item() + ops::cross_entropy(l.robust, b.y).item() +
                          ops::cross_entropy(l.nonrobust, b.y).item();
  EXPECT_NEAR(loss_st(m, b.x, b.y).item(), expected, 1e-5);
}

TEST(LossTest, AatWithEmptyMaskEqualsLossSt) {
  const auto m = Model::init(small_spec(), 4);
  auto b = make_batch(5);
  {
    NoGradGuard no_grad;
    b.y = ops::argmax_rows(m.forward_way(b.x, Way::kStandard));
  }
  const AttackConfig none{Norm::kL2, 0.0, 0.01, 5};
  const auto total = total_loss(m, b.x, b.y, LossConfig::aat(), none);
  EXPECT_EQ(total.as_masked, 0u);
  EXPECT_EQ(total.as, 0.0);
  EXPECT_EQ(total.total.item(), loss_st(m, b.x, b.y).item());
}

TEST(LossTest, AatPlusPlusIsSumOfItsTerms) {
  const auto m = Model::init(small_spec(), 6);
  const auto b = make_batch(7);
  const auto total = total_loss(m, b.x, b.y, LossConfig::aat_plus_plus(), kStrong);
  const double separate = loss_st(m, b.x, b.y).item() + loss_as(m, b.x, b.y, kStrong).loss.item() +
                          loss_ar(m, b.x, b.y, kStrong).loss.item() + loss_an(m, b.x, b.y, kStrong).loss.item();
  EXPECT_NEAR(total.total.item(), separate, 1e-6 * std::max(1.0, std::abs(separate)));
  EXPECT_NEAR(total.st + total.as + total.ar + total.an, separate, 1e-5);
}

TEST(LossTest, MaskedSamplesAlwaysCarryDifferentVirtualLabels) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = Model::init(small_spec(), 10 + seed);
    const auto b = make_batch(20 + seed, 32);
    for (const auto& term : {loss_as(m, b.x, b.y, kStrong), loss_an(m, b.x, b.y, kStrong)}) {
      std::size_t masked = 0;
      for (std::size_t i = 0; i < b.y.size(); ++i) {
        if (!term.labels.misclassified[i]) continue;
        ++masked;
        ASSERT_NE(term.labels.predicted[i], b.y[i]);
      }
      EXPECT_EQ(masked, term.labels.count);
    }
  }
}

void expect_zero(const std::vector<NamedParam<float>>& params) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (float g : p.tensor.grad()) ASSERT_EQ(g, 0.0f) << p.name;
  }
}

TEST(LossTest, RobustAdversarialTermLeavesNonRobustEncoderAlone) {
  auto m = Model::init(small_spec(), 30);
  const auto b = make_batch(31);
  backward(loss_ar(m, b.x, b.y, kStrong).loss);
  expect_zero(m.parameters(Branch::kNonRobust));
}

TEST(LossTest, NonRobustAdversarialTermLeavesRobustEncoderAlone) {
  auto m = Model::init(small_spec(), 32);
  const auto b = make_batch(33);
  const auto term = loss_an(m, b.x, b.y, kStrong);
  ASSERT_GT(term.labels.count, 0u);
  backward(term.loss);
  expect_zero(m.parameters(Branch::kRobust));
}

TEST(LossTest, AdversarialInputsAreTreatedAsConstants) {
  auto m = Model::init(small_spec(), 40);
  const auto b = make_batch(41);
  const auto term = loss_ar(m, b.x, b.y, kStrong);
  backward(term.loss);
  const auto via_term = flat_grads(m);
  m.zero_grad();
  const auto stored = Tensor<float>(term.x_adv.shape(), {term.x_adv.values().begin(), term.x_adv.values().end()});
  backward(ops::cross_entropy(m.forward_way(stored, Way::kRobust), b.y));
  const auto fresh = flat_grads(m);
  ASSERT_EQ(via_term.size(), fresh.size());
  for (std::size_t i = 0; i < fresh.size(); ++i) ASSERT_NEAR(via_term[i], fresh[i], 1e-6f);
}

TEST(LossTest, BatchNormalizationScalesByMaskFraction) {
  const auto m = Model::init(small_spec(), 50);
  const auto b = make_batch(51, 16);
  const auto masked = loss_an(m, b.x, b.y, kStrong, MaskNormalization::kMaskedCount);
  const auto batch = loss_an(m, b.x, b.y, kStrong, MaskNormalization::kBatchSize);
  ASSERT_GT(masked.labels.count, 0u);
  EXPECT_NEAR(batch.loss.item(), masked.loss.item() * masked.labels.count / 16.0, 1e-5);
}

TEST(LossConfigTest, ParseAndValidate) {
  EXPECT_EQ(LossConfig::parse("st,as"), LossConfig::aat());
  EXPECT_EQ(LossConfig::parse("st,as,ar,an"), LossConfig::aat_plus_plus());
  EXPECT_EQ(LossConfig::parse("st,as,ar,an").describe(), "st,as,ar,an");
  EXPECT_THROW(LossConfig::parse("st,xx"), ValidationError);
  EXPECT_THROW(LossConfig::parse(""), ValidationError);
}

TEST(TrainConfigTest, MilestonesScaleLearningRate) {
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.epochs = 56;
  cfg.milestones = {50, 55};
  EXPECT_DOUBLE_EQ(cfg.lr_at(0), 0.1);
  EXPECT_DOUBLE_EQ(cfg.lr_at(49), 0.1);
  EXPECT_NEAR(cfg.lr_at(50), 0.01, 1e-15);
  EXPECT_NEAR(cfg.lr_at(55), 0.001, 1e-15);
  cfg.milestones = {55, 50};
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.milestones = {56};
  EXPECT_THROW(cfg.validate(), ValidationError);
}

// Momentum SGD with L2 weight decay, written out as a scalar loop.
TEST(SgdTest, MatchesReferenceLoop) {
  auto w = Tensor<float>({3}, {1.0f, -2.0f, 0.5f}, true);
  Sgd sgd({{"w", w}}, 0.9, 0.01);
  std::vector<double> p{1.0, -2.0, 0.5}, v(3, 0.0);
  const std::vector<std::vector<float>> grads{{0.1f, 0.2f, -0.3f}, {-0.5f, 0.0f, 0.25f}, {1.0f, 1.0f, 1.0f}};
  const std::vector<double> rates{0.1, 0.1, 0.01};
  for (std::size_t t = 0; t < grads.size(); ++t) {
    w.zero_grad();
    auto g = w.mutable_grad();
    std::copy(grads[t].begin(), grads[t].end(), g.begin());
    sgd.step(rates[t]);
    for (std::size_t i = 0; i < 3; ++i) {
      const double grad = grads[t][i] + 0.01 * p[i];
      v[i] = 0.9 * v[i] + grad;
      p[i] -= rates[t] * v[i];
      EXPECT_NEAR(w.values()[i], p[i], 1e-6);
    }
  }
}

TEST(TrainTest, ZeroEpochsLeavesModelBitIdentical) {
  auto m = Model::init(small_spec(), 60);
  const auto before = flat_params(m);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.attack_train = kStrong;
  EXPECT_TRUE(train(m, random_dataset(20, 61), cfg).empty());
  EXPECT_EQ(flat_params(m), before);
}

TEST(TrainTest, ZeroLearningRateLeavesParametersUnchanged) {
  auto m = Model::init(small_spec(), 62);
  const auto before = flat_params(m);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.lr = 0;
  cfg.batch_size = 8;
  cfg.attack_train = kStrong;
  const auto logs = train(m, random_dataset(20, 63), cfg);
  EXPECT_EQ(logs.size(), 2u);
  EXPECT_EQ(flat_params(m), before);
}

TEST(TrainTest, IdenticalSeedsGiveIdenticalParameters) {
  const auto data = random_dataset(40, 64);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.attack_train = kStrong;
  cfg.seed = 5;
  auto a = Model::init(small_spec(), 65);
  auto b = Model::init(small_spec(), 65);
  const auto la = train(a, data, cfg);
  const auto lb = train(b, data, cfg);
  EXPECT_EQ(flat_params(a), flat_params(b));
  EXPECT_EQ(la.back().to_json().dump(), lb.back().to_json().dump());
  EXPECT_NE(flat_params(a), flat_params(Model::init(small_spec(), 65)));
}

TEST(TrainTest, NonFiniteLossAbortsNamingTermAndEpoch) {
  const auto data = random_dataset(10, 66);
  auto m = Model::init(small_spec(), 67);
  m.parameters().back().tensor.mutable_values()[0] = std::nanf("");
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.loss = LossConfig::standard();
  try {
    train(m, data, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'st'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
  }
}

TEST(TrainTest, RejectsEmptyOrMismatchedData) {
  auto m = Model::init(small_spec(), 68);
  Dataset empty;
  empty.sample_shape = {1, 10, 10};
  empty.num_classes = 3;
  EXPECT_THROW(train(m, empty, TrainConfig{}), ValidationError);
  auto wrong = random_dataset(4, 69);
  wrong.num_classes = 5;
  EXPECT_THROW(train(m, wrong, TrainConfig{}), ValidationError);
}

TEST(TrainTest, EpochLogReportsEveryTerm) {
  auto m = Model::init(small_spec(), 70);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.attack_train = kStrong;
  std::vector<EpochLog> seen;
  train(m, random_dataset(16, 71), cfg, [&](const EpochLog& log) { seen.push_back(log); });
  ASSERT_EQ(seen.size(), 1u);
  const auto j = seen[0].to_json();
  for (const char* term : {"st", "as", "ar", "an"}) EXPECT_TRUE(j["loss"].contains(term));
  for (const char* way : {"S", "R", "N"}) EXPECT_TRUE(j["clean_acc"].contains(way));
  EXPECT_GT(seen[0].loss_ar, 0.0);
}

TEST(DilemmaLearningTest, StandardTrainingApproachesBayesAccuracy) {
  auto cfg = RunConfig::preset("dilemma-default");
  cfg.train.loss = LossConfig::standard();
  const auto train_data = load_train_data(cfg);
  const auto test_data = load_test_data(cfg);
  const auto run = run_training(cfg, train_data);
  const double bayes = 100.0 * dilemma::exact_standard_accuracy(
                                   cfg.dilemma.spec, dilemma::LinearSignClassifier::h0(cfg.dilemma.spec));
  EXPECT_NEAR(accuracy(run.model, test_data, Way::kStandard), bayes, 3.0);
}

}  // namespace
}  // namespace aat
