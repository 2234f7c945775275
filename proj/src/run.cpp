#include "aat/run.hpp"

#include <cmath>

#include "aat/errors.hpp"

namespace aat {

namespace {

// Separate seed streams for the two dilemma splits.
constexpr std::uint64_t kDilemmaTrainStream = 11;
constexpr std::uint64_t kDilemmaTestStream = 12;

}  // namespace

Dataset load_train_data(const RunConfig& cfg) {
  if (cfg.data.kind == DataKind::kDilemma) {
    const auto seed = Rng(cfg.data.subset_seed).fork(kDilemmaTrainStream).next();
    return dilemma::to_dataset(dilemma::sample_dataset(cfg.dilemma.spec, cfg.dilemma.train_samples, seed));
  }
  const auto full = load_mnist_split(resolve_data_dir(cfg.paths.data_dir), "train");
  return subset(full, cfg.data.train_subset, cfg.data.subset_seed);
}

Dataset load_test_data(const RunConfig& cfg) {
  if (cfg.data.kind == DataKind::kDilemma) {
    const auto seed = Rng(cfg.data.subset_seed).fork(kDilemmaTestStream).next();
    return dilemma::to_dataset(dilemma::sample_dataset(cfg.dilemma.spec, cfg.dilemma.test_samples, seed));
  }
  const auto full = load_mnist_split(resolve_data_dir(cfg.paths.data_dir), "t10k");
  if (cfg.data.test_subset == 0) return full;
  return subset(full, cfg.data.test_subset, cfg.data.subset_seed);
}

Model init_model(const RunConfig& cfg, const Dataset& train_data) {
  BackboneSpec spec = cfg.model;
  if (cfg.data.kind == DataKind::kDilemma && spec.input_scale.empty()) {
    std::vector<double> mean(train_data.sample_numel(), 0.0);
    for (std::size_t s = 0; s < train_data.size(); ++s) {
      const auto row = train_data.image(s);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += std::abs(row[i]);
    }
    for (double m : mean) {
      const double avg = m / static_cast<double>(train_data.size());
      spec.input_scale.push_back(avg > 0 ? static_cast<float>(1.0 / avg) : 1.0f);
    }
  }
  return Model::init(spec, cfg.train.seed);
}

TrainedRun run_training(const RunConfig& cfg, const Dataset& train_data, const EpochSink& sink) {
  cfg.validate();
  auto model = init_model(cfg, train_data);
  auto logs = train(model, train_data, cfg.train, sink);
  return {std::move(model), std::move(logs)};
}

CheckpointMeta checkpoint_meta(const RunConfig& cfg) {
  CheckpointMeta meta;
  meta.config_hash = cfg.hash();
  meta.epoch = cfg.train.epochs;
  meta.seed = cfg.train.seed;
  auto stored = cfg.to_json();
  stored.erase("paths");
  meta.extra = {{"name", cfg.name}, {"loss", cfg.train.loss.describe()}, {"config", stored}};
  return meta;
}

}  // namespace aat
