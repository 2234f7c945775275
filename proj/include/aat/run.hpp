#pragma once

#include <vector>

#include "aat/checkpoint.hpp"
#include "aat/config.hpp"

namespace aat {

// Training data for a run: the MNIST train split (subset per config) or a
// fresh dilemma sample.
Dataset load_train_data(const RunConfig& cfg);
Dataset load_test_data(const RunConfig& cfg);

// Model initialised from cfg.train.seed. For dilemma data without an explicit
// input_scale, the per-feature scale is derived from the training sample.
Model init_model(const RunConfig& cfg, const Dataset& train_data);

struct TrainedRun {
  Model model;
  std::vector<EpochLog> logs;
};

TrainedRun run_training(const RunConfig& cfg, const Dataset& train_data, const EpochSink& sink = {});

CheckpointMeta checkpoint_meta(const RunConfig& cfg);

}  // namespace aat
