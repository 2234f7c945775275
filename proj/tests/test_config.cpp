#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "aat/config.hpp"
#include "aat/errors.hpp"

namespace aat {
namespace {

TEST(ConfigTest, EveryPresetValidates) {
  for (const auto& name : RunConfig::preset_names()) {
    EXPECT_NO_THROW(RunConfig::preset(name).validate()) << name;
  }
  EXPECT_THROW(RunConfig::preset("nope"), ConfigError);
}

TEST(ConfigTest, PresetValues) {
  const auto full = RunConfig::preset("mnist-full");
  EXPECT_EQ(full.train.epochs, 56u);
  EXPECT_EQ(full.train.milestones, (std::vector<std::size_t>{50, 55}));
  EXPECT_DOUBLE_EQ(full.train.lr, 0.1);
  EXPECT_DOUBLE_EQ(full.train.momentum, 0.9);
  EXPECT_DOUBLE_EQ(full.train.weight_decay, 5e-4);
  EXPECT_EQ(full.train.batch_size, 128u);
  EXPECT_EQ(full.train.attack_train.norm, Norm::kL2);
  EXPECT_DOUBLE_EQ(full.train.attack_train.epsilon, 0.3);
  EXPECT_EQ(full.train.attack_train.steps, 5u);
  ASSERT_EQ(full.attack_test.size(), 1u);
  EXPECT_EQ(full.attack_test[0].steps, 10u);
}

TEST(ConfigTest, JsonRoundTripPreservesEverything) {
  for (const auto& name : RunConfig::preset_names()) {
    const auto cfg = RunConfig::preset(name);
    const auto again = RunConfig::from_json(Json::parse(cfg.to_json().dump()));
    EXPECT_EQ(again.to_json(), cfg.to_json()) << name;
    EXPECT_EQ(again.hash(), cfg.hash()) << name;
  }
}

TEST(ConfigTest, HashIgnoresPathsAndNameButTracksResults) {
  auto a = RunConfig::preset("mnist-aat-desk");
  auto b = a;
  b.paths.out = "elsewhere";
  b.name = "renamed";
  EXPECT_EQ(a.hash(), b.hash());
  b.train.seed = 1234;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(ConfigTest, UnknownKeysAreRejectedWithPath) {
  try {
    RunConfig::from_json(Json::parse(R"({"train": {"lr": 0.1, "learning_rate": 0.2}})"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.learning_rate"), std::string::npos) << e.what();
  }
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"extra": 1})")), ConfigError);
}

TEST(ConfigTest, RangesAndTypesAreChecked) {
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"train": {"lr": -1}})")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"train": {"epochs": "ten"}})")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"train": {"loss": "st,xx"}})")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"train": {"mask_normalization": "half"}})")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"data": {"kind": "cifar"}})")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"attack_test": {}})")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(Json::parse(R"({"dilemma": {"p": 0.4}})")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(Json::parse("[1, 2]")), ConfigError);
}

TEST(ConfigTest, MissingKeysKeepBaseValues) {
  const auto base = RunConfig::preset("dilemma-default");
  const auto cfg = RunConfig::from_json(Json::parse(R"({"train": {"epochs": 2}})"), base);
  EXPECT_EQ(cfg.train.epochs, 2u);
  EXPECT_EQ(cfg.train.lr, base.train.lr);
  EXPECT_EQ(cfg.data.kind, DataKind::kDilemma);
}

TEST(ConfigTest, DilemmaDataNeedsMatchingModel) {
  auto cfg = RunConfig::preset("dilemma-default");
  cfg.model = BackboneSpec::mnist_cnn();
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ConfigTest, LoaderReportsMalformedAndMissingFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "aat_config_loader";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_run_config((dir / "bad.json").string(), RunConfig{}), ConfigError);
  EXPECT_THROW(load_run_config((dir / "absent.json").string(), RunConfig{}), IoError);
  std::ofstream(dir / "ok.json") << R"({"name": "x", "train": {"epochs": 1}})";
  EXPECT_EQ(load_run_config((dir / "ok.json").string(), RunConfig{}).train.epochs, 1u);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace aat
