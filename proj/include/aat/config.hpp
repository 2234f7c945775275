#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aat/dilemma.hpp"
#include "aat/evaluation.hpp"
#include "aat/json_io.hpp"
#include "aat/training.hpp"

namespace aat {

enum class DataKind { kMnist, kDilemma };

struct DataConfig {
  DataKind kind = DataKind::kMnist;
  std::size_t train_subset = 10000;  // 0 keeps every sample
  std::size_t test_subset = 0;
  std::uint64_t subset_seed = 0;
};

struct DilemmaConfig {
  dilemma::DilemmaSpec spec;
  std::size_t train_samples = 20000;
  std::size_t test_samples = 5000;
  std::size_t monte_carlo_samples = 100000;
};

struct PathsConfig {
  std::string data_dir;  // empty: AAT_DATA_DIR, then ./data
  std::string out = "runs";
};

// Everything a command needs, validated as a whole before any compute.
struct RunConfig {
  std::string name = "custom";
  BackboneSpec model = BackboneSpec::mnist_cnn();
  TrainConfig train;
  std::vector<AttackConfig> attack_test{AttackConfig::mnist_test()};
  EvalOptions eval;  // attacks are taken from attack_test
  DataConfig data;
  DilemmaConfig dilemma;
  PathsConfig paths;

  static RunConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
  // Unknown keys anywhere are rejected; missing keys keep the values of `base`.
  static RunConfig from_json(const Json& j);
  static RunConfig from_json(const Json& j, const RunConfig& base);

  Json to_json() const;
  void validate() const;
  // Hash of everything that affects results (paths excluded).
  std::string hash() const;
  EvalOptions eval_options() const;
};

RunConfig load_run_config(const std::string& path, const RunConfig& base);

}  // namespace aat
