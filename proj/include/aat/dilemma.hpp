#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aat/data.hpp"
#include "aat/json_io.hpp"

namespace aat::dilemma {

// Binary problem with label y in {-1, +1}: feature i equals +eta_i * y with
// probability p and -eta_i * y otherwise, independently across features.
struct DilemmaSpec {
  double p = 0.8;
  std::vector<double> eta{0.01, 0.01, 0.01, 0.01, 1.0, 1.0, 1.0};
  double epsilon = 0.02;  // l-inf budget of the adversary

  std::size_t d() const { return eta.size(); }
  // 0.5 < p <= 1, odd feature count, eta > 0, epsilon >= 0.
  void validate() const;
  Json to_json() const;
  static DilemmaSpec from_json(const Json& j, const std::string& path = "dilemma");
};

inline constexpr std::size_t kMaxEnumerationFeatures = 24;

// Predicts sign(w . x); a zero score counts as a wrong prediction.
struct LinearSignClassifier {
  std::string name;
  std::vector<double> w;

  // Weights 1/eta_i: the majority vote over all features.
  static LinearSignClassifier h0(const DilemmaSpec& spec);
  // Weights 1 on features with eta_i >= 1 and 0 elsewhere.
  static LinearSignClassifier h1(const DilemmaSpec& spec);

  int predict(std::span<const double> x) const;
};

// Worst-case l-inf perturbation of x against a linear sign classifier: every
// coordinate with w_i != 0 moves by epsilon against y * sign(w_i).
std::vector<double> worst_case(const LinearSignClassifier& clf, std::span<const double> x, int y, double epsilon);

// Expected accuracy by enumerating all 2^d agreement patterns.
double exact_standard_accuracy(const DilemmaSpec& spec, const LinearSignClassifier& clf);
double exact_adversarial_accuracy(const DilemmaSpec& spec, const LinearSignClassifier& clf);

// 1 - C(d, m) (1 - p)^m with m = (d + 1) / 2: keeps only the smallest losing
// binomial term and drops its p-power factor.
double closed_form_approx(std::size_t d, double p);

struct Sample {
  std::vector<double> x;  // n rows of d features
  std::vector<int> y;     // -1 or +1
  std::size_t d = 0;
  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * d, d}; }
};

Sample sample_dataset(const DilemmaSpec& spec, std::size_t n, std::uint64_t seed);

double monte_carlo_accuracy(const DilemmaSpec& spec, const LinearSignClassifier& clf, std::size_t n,
                            std::uint64_t seed, bool adversarial);

// Class-indexed dataset (y = -1 -> 0, +1 -> 1) shaped 1x1xd for the MLP backbone.
Dataset to_dataset(const Sample& sample);

struct ClassifierReport {
  std::string name;
  double exact_standard = 0;
  double exact_adversarial = 0;
  double mc_standard = 0;
  double mc_adversarial = 0;
  double mc_standard_halfwidth = 0;     // 3 sigma binomial bound at the exact value
  double mc_adversarial_halfwidth = 0;
};

struct Report {
  DilemmaSpec spec;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<ClassifierReport> classifiers;
  double closed_form_h0 = 0;
  double closed_form_h1 = 0;

  Json to_json() const;
  std::string table() const;
};

Report run_report(const DilemmaSpec& spec, std::size_t n, std::uint64_t seed);

}  // namespace aat::dilemma
