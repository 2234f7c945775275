#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aat/attack.hpp"
#include "aat/data.hpp"
#include "aat/json_io.hpp"
#include "aat/model.hpp"

namespace aat {

// Accuracies in percent for the standard, robust and non-robust ways.
struct WayAccuracy {
  double standard = 0;
  double robust = 0;
  double nonrobust = 0;
};

inline constexpr std::size_t kEvalBatch = 256;

double accuracy(const Model& model, const Dataset& data, Way way, std::size_t batch_size = kEvalBatch);
WayAccuracy clean_accuracy(const Model& model, const Dataset& data, std::size_t batch_size = kEvalBatch);

// Difference in accuracy: robust-way minus non-robust-way adversarial accuracy.
inline double dia(double adv_robust, double adv_nonrobust) { return adv_robust - adv_nonrobust; }

// Robust way under attacks on the robust-way loss, non-robust way under
// attacks on the non-robust-way loss.
struct PerWayAdv {
  double robust = 0;
  double nonrobust = 0;
  double dia() const { return aat::dia(robust, nonrobust); }
};

PerWayAdv eval_per_way_adv(const Model& model, const Dataset& data, const AttackConfig& cfg, std::uint64_t seed = 0,
                           std::size_t batch_size = kEvalBatch);

// One attack on the standard-way loss; all three ways are scored on the same
// adversarial batches. input_digest records, per way, a hash of the inputs it
// was scored on.
struct StandardWayAdv {
  WayAccuracy acc;
  std::array<std::string, 3> input_digest;
};

StandardWayAdv eval_standard_way_adv(const Model& model, const Dataset& data, const AttackConfig& cfg,
                                     std::uint64_t seed = 0, std::size_t batch_size = kEvalBatch);

// 1 when the robust and non-robust ways disagree on the argmax, else 0.
std::vector<int> detect(const Model& model, const Tensor<float>& x);

// Natural samples and their standard-way adversarial counterparts in equal
// numbers, shuffled together; tags are 0 natural, 1 adversarial.
struct MixedSet {
  Dataset samples;
  std::vector<int> tags;
};

MixedSet build_mixed_set(const Model& model, const Dataset& natural, const AttackConfig& cfg, std::uint64_t seed,
                         std::size_t batch_size = kEvalBatch);

// Percentage of verdicts equal to their tag.
double rad_from(std::span<const int> verdicts, std::span<const int> tags);
double rad(const Model& model, const MixedSet& mixed, std::size_t batch_size = kEvalBatch);

struct Calibration {
  double raw = 0;         // standard way on every sample
  double calibrated = 0;  // robust way where the detector fires, standard way elsewhere
};

Calibration calibrate_from(std::span<const int> verdicts, std::span<const int> pred_standard,
                           std::span<const int> pred_robust, std::span<const int> labels);
Calibration calibrate(const Model& model, const MixedSet& mixed, std::size_t batch_size = kEvalBatch);

struct DetectionReport {
  double rad = 0;
  Calibration calibration;
  std::size_t samples = 0;
};

DetectionReport detection_report(const Model& model, const MixedSet& mixed, std::size_t batch_size = kEvalBatch);

struct AttackEntry {
  AttackConfig attack;
  PerWayAdv per_way;
  std::optional<WayAccuracy> standard_way;
};

struct EvalReport {
  std::string label;
  std::size_t samples = 0;
  WayAccuracy clean;
  std::vector<AttackEntry> attacks;
  std::optional<DetectionReport> detection;

  Json to_json() const;
  static EvalReport from_json(const Json& j);
  // Aligned text table: clean S/R/N, then per attack R/N/DIA under per-way
  // attacks and S/R/N/DIA under the standard-way attack.
  std::string table() const;
};

struct EvalOptions {
  std::vector<AttackConfig> attacks;
  bool standard_way = true;
  bool detection = true;
  std::size_t batch_size = kEvalBatch;
  std::uint64_t seed = 0;
};

EvalReport evaluate(const Model& model, const Dataset& data, const EvalOptions& options, const std::string& label);

}  // namespace aat
