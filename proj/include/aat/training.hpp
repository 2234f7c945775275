#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aat/attack.hpp"
#include "aat/data.hpp"
#include "aat/json_io.hpp"
#include "aat/model.hpp"

namespace aat {

// Denominator for the misclassification-gated terms: the number of masked
// samples (per-sample semantics) or the full batch size.
enum class MaskNormalization { kMaskedCount, kBatchSize };

// Which terms enter the objective. AAT = {st, as}; AAT++ = all four.
struct LossConfig {
  bool st = true;
  bool as = false;
  bool ar = false;
  bool an = false;
  MaskNormalization mask_normalization = MaskNormalization::kMaskedCount;

  static LossConfig standard() { return {true, false, false, false}; }
  static LossConfig aat() { return {true, true, false, false}; }
  static LossConfig aat_plus_plus() { return {true, true, true, true}; }
  // Comma-separated subset of st, as, ar, an.
  static LossConfig parse(const std::string& list);

  std::string describe() const;
  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

struct TrainConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t epochs = 5;
  std::vector<std::size_t> milestones;  // lr x 0.1 from each listed epoch on
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  AttackConfig attack_train = AttackConfig::mnist_train();
  LossConfig loss = LossConfig::aat_plus_plus();

  void validate() const;
  double lr_at(std::size_t epoch) const;
};

// l(h_s(x), y) + l(h_r(x), y) + l(h_n(x), y), each a batch mean.
Tensor<float> loss_st(const Model& model, const Tensor<float>& x, const Labels& y);

// One misclassification-gated or adversarial loss term together with the
// adversarial batch and virtual labels it was built from.
struct AdversarialTerm {
  Tensor<float> loss;  // shape [1]; an exact constant 0 when nothing is masked
  Tensor<float> x_adv;
  PseudoLabels labels;
};

// Attack the standard way; on misclassified samples, robust way learns y and
// non-robust way learns the virtual label.
AdversarialTerm loss_as(const Model& model, const Tensor<float>& x, const Labels& y, const AttackConfig& attack,
                        MaskNormalization normalization = MaskNormalization::kMaskedCount, Rng* rng = nullptr);

// Adversarial training of the robust way over the full batch.
AdversarialTerm loss_ar(const Model& model, const Tensor<float>& x, const Labels& y, const AttackConfig& attack,
                        Rng* rng = nullptr);

// Attack the non-robust way; on misclassified samples it learns the virtual label.
AdversarialTerm loss_an(const Model& model, const Tensor<float>& x, const Labels& y, const AttackConfig& attack,
                        MaskNormalization normalization = MaskNormalization::kMaskedCount, Rng* rng = nullptr);

struct LossBreakdown {
  Tensor<float> total;
  double st = 0, as = 0, ar = 0, an = 0;
  std::size_t batch = 0;
  std::size_t as_masked = 0, an_masked = 0;
};

LossBreakdown total_loss(const Model& model, const Tensor<float>& x, const Labels& y, const LossConfig& loss,
                         const AttackConfig& attack, Rng* rng = nullptr);

// SGD with momentum; weight decay is added to the gradient (L2 convention).
class Sgd {
 public:
  Sgd(std::vector<NamedParam<float>> params, double momentum, double weight_decay);
  void step(double lr);

 private:
  std::vector<NamedParam<float>> params_;
  std::vector<std::vector<float>> velocity_;
  double momentum_;
  double weight_decay_;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double lr = 0;
  double loss_st = 0, loss_as = 0, loss_ar = 0, loss_an = 0;  // batch means
  double as_mask_fraction = 0, an_mask_fraction = 0;
  std::array<double, 3> clean_acc{};  // S, R, N on the training stream, percent
  double seconds = 0;

  Json to_json() const;
};

using EpochSink = std::function<void(const EpochLog&)>;

std::vector<EpochLog> train(Model& model, const Dataset& data, const TrainConfig& cfg, const EpochSink& sink = {});

}  // namespace aat
