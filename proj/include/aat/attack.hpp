#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "aat/model.hpp"
#include "aat/rng.hpp"
#include "aat/tensor.hpp"

namespace aat {

enum class Norm { kLinf, kL2 };

std::string to_string(Norm norm);
Norm parse_norm(const std::string& text);

// PGD threat model: ||delta|| <= epsilon under `norm`, `steps` ascent steps of
// size `alpha`. Pixel values are clamped to [clamp_lo, clamp_hi] after every
// step unless `clamp` is off (used for non-image feature vectors).
struct AttackConfig {
  Norm norm = Norm::kL2;
  double epsilon = 0.3;
  double alpha = 0.01;
  std::size_t steps = 10;
  bool random_start = false;
  bool clamp = true;
  float clamp_lo = 0.0f;
  float clamp_hi = 1.0f;

  void validate() const;
  std::string describe() const;
  bool operator==(const AttackConfig&) const = default;

  // Reference threat models for the two benchmark datasets.
  static AttackConfig mnist_train();  // l2, 0.3, 0.01, 5 steps
  static AttackConfig mnist_test();   // l2, 0.3, 0.01, 10 steps
  static AttackConfig cifar_train();  // linf, 8/255, 2/255, 10 steps
  static AttackConfig cifar_test_linf();
  static AttackConfig cifar_test_l2();
};

// Untargeted PGD maximizing the cross-entropy of `way` at (x, y). The model is
// never modified and the returned tensor is a detached constant. `rng` is only
// consulted when cfg.random_start is set.
Tensor<float> pgd(const Model& model, const Tensor<float>& x, const Labels& y, Way way, const AttackConfig& cfg,
                  Rng* rng = nullptr);

struct PseudoLabels {
  Labels predicted;                 // argmax of the way, lowest index on ties
  std::vector<bool> misclassified;  // predicted != y
  std::size_t count = 0;            // number of misclassified samples
};

PseudoLabels pseudo_label(const Model& model, const Tensor<float>& x_adv, const Labels& y, Way way);

// Per-sample perturbation norm ||x_adv - x|| under `norm`.
std::vector<double> perturbation_norms(const Tensor<float>& x, const Tensor<float>& x_adv, Norm norm);

}  // namespace aat
