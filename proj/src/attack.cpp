#include "aat/attack.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aat/errors.hpp"
#include "aat/ops.hpp"

namespace aat {

std::string to_string(Norm norm) { return norm == Norm::kLinf ? "linf" : "l2"; }

Norm parse_norm(const std::string& text) {
  if (text == "linf") return Norm::kLinf;
  if (text == "l2") return Norm::kL2;
  throw ValidationError("unknown norm '" + text + "' (expected linf or l2)");
}

void AttackConfig::validate() const {
  if (!std::isfinite(epsilon) || epsilon < 0) {
    throw ValidationError("attack epsilon must be finite and >= 0, got " + std::to_string(epsilon));
  }
  if (!std::isfinite(alpha) || alpha <= 0) {
    throw ValidationError("attack alpha must be finite and > 0, got " + std::to_string(alpha));
  }
  if (clamp && !(clamp_lo < clamp_hi)) throw ValidationError("attack clamp range is empty");
}

std::string AttackConfig::describe() const {
  std::ostringstream out;
  out << to_string(norm) << " eps=" << epsilon << " alpha=" << alpha << " k=" << steps;
  if (random_start) out << " rs";
  return out.str();
}

AttackConfig AttackConfig::mnist_train() { return {Norm::kL2, 0.3, 0.01, 5}; }
AttackConfig AttackConfig::mnist_test() { return {Norm::kL2, 0.3, 0.01, 10}; }
AttackConfig AttackConfig::cifar_train() { return {Norm::kLinf, 8.0 / 255.0, 2.0 / 255.0, 10}; }
AttackConfig AttackConfig::cifar_test_linf() { return {Norm::kLinf, 8.0 / 255.0, 2.0 / 255.0, 20}; }
AttackConfig AttackConfig::cifar_test_l2() { return {Norm::kL2, 0.3, 0.1, 20}; }

namespace {

double l2_norm(const float* v, std::size_t n) {
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(v[i]) * v[i];
  return std::sqrt(acc);
}

void project(std::vector<float>& delta, std::size_t batch, std::size_t dim, const AttackConfig& cfg) {
  const auto eps = static_cast<float>(cfg.epsilon);
  if (cfg.norm == Norm::kLinf) {
    for (auto& d : delta) d = std::clamp(d, -eps, eps);
    return;
  }
  for (std::size_t b = 0; b < batch; ++b) {
    float* row = delta.data() + b * dim;
    const double norm = l2_norm(row, dim);
    if (norm > cfg.epsilon) {
      const auto factor = static_cast<float>(cfg.epsilon / norm);
      for (std::size_t i = 0; i < dim; ++i) row[i] *= factor;
    }
  }
}

// Writes x + delta (clamped) into `out` and pulls delta back to what the clamp
// allowed, so delta always equals out - x.
void apply(const std::vector<float>& x, std::vector<float>& delta, std::vector<float>& out, const AttackConfig& cfg) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    float v = x[i] + delta[i];
    if (cfg.clamp) v = std::clamp(v, cfg.clamp_lo, cfg.clamp_hi);
    out[i] = v;
    delta[i] = v - x[i];
  }
}

void random_start(std::vector<float>& delta, std::size_t batch, std::size_t dim, const AttackConfig& cfg, Rng& rng) {
  if (cfg.norm == Norm::kLinf) {
    for (auto& d : delta) d = static_cast<float>(rng.uniform(-cfg.epsilon, cfg.epsilon));
    return;
  }
  // Uniform in the l2 ball: Gaussian direction, radius eps * u^(1/dim).
  for (std::size_t b = 0; b < batch; ++b) {
    float* row = delta.data() + b * dim;
    for (std::size_t i = 0; i < dim; ++i) row[i] = static_cast<float>(rng.normal());
    const double norm = l2_norm(row, dim);
    const double radius = cfg.epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
    const auto factor = static_cast<float>(norm > 0 ? radius / norm : 0.0);
    for (std::size_t i = 0; i < dim; ++i) row[i] *= factor;
  }
}

}  // namespace

Tensor<float> pgd(const Model& model, const Tensor<float>& x, const Labels& y, Way way, const AttackConfig& cfg,
                  Rng* rng) {
  cfg.validate();
  if (x.ndim() < 2 || x.size(0) != y.size()) {
    throw DimensionError("pgd: " + std::to_string(y.size()) + " labels for input " + shape_string(x.shape()));
  }
  const std::size_t batch = x.size(0);
  const std::size_t dim = x.numel() / batch;
  const std::vector<float> clean(x.values().begin(), x.values().end());
  if (cfg.epsilon == 0.0 || cfg.steps == 0) return Tensor<float>(x.shape(), clean);

  const Model frozen = model.frozen();
  std::vector<float> delta(clean.size(), 0.0f);
  std::vector<float> current(clean.size());
  if (cfg.random_start) {
    if (rng == nullptr) throw UsageError("pgd: random_start needs a generator");
    random_start(delta, batch, dim, cfg, *rng);
    project(delta, batch, dim, cfg);
  }
  apply(clean, delta, current, cfg);

  const auto alpha = static_cast<float>(cfg.alpha);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Tensor<float> input(x.shape(), current, true);
    // Summed loss so every sample's gradient keeps its own scale.
    backward(ops::cross_entropy(frozen.forward_way(input, way), y, ops::Reduction::kSum));
    const auto grad = input.grad();
    if (cfg.norm == Norm::kLinf) {
      for (std::size_t i = 0; i < delta.size(); ++i) {
        const float g = grad[i];
        delta[i] += alpha * static_cast<float>((g > 0) - (g < 0));
      }
    } else {
      for (std::size_t b = 0; b < batch; ++b) {
        const double norm = l2_norm(grad.data() + b * dim, dim);
        if (norm < 1e-12) continue;
        const auto factor = static_cast<float>(cfg.alpha / norm);
        for (std::size_t i = 0; i < dim; ++i) delta[b * dim + i] += factor * grad[b * dim + i];
      }
    }
    project(delta, batch, dim, cfg);
    apply(clean, delta, current, cfg);
  }
  return Tensor<float>(x.shape(), std::move(current));
}

PseudoLabels pseudo_label(const Model& model, const Tensor<float>& x_adv, const Labels& y, Way way) {
  NoGradGuard no_grad;
  PseudoLabels out;
  out.predicted = ops::argmax_rows(model.forward_way(x_adv, way));
  if (out.predicted.size() != y.size()) {
    throw DimensionError("pseudo_label: " + std::to_string(y.size()) + " labels for " +
                         std::to_string(out.predicted.size()) + " samples");
  }
  out.misclassified.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.misclassified[i] = out.predicted[i] != y[i];
    out.count += out.misclassified[i] ? 1 : 0;
  }
  return out;
}

std::vector<double> perturbation_norms(const Tensor<float>& x, const Tensor<float>& x_adv, Norm norm) {
  if (x.shape() != x_adv.shape()) {
    throw DimensionError("perturbation_norms: " + shape_string(x.shape()) + " vs " + shape_string(x_adv.shape()));
  }
  const std::size_t batch = x.size(0);
  const std::size_t dim = x.numel() / batch;
  std::vector<double> out(batch, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    double acc = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = static_cast<double>(x_adv[b * dim + i]) - x[b * dim + i];
      acc = norm == Norm::kLinf ? std::max(acc, std::abs(d)) : acc + d * d;
    }
    out[b] = norm == Norm::kLinf ? acc : std::sqrt(acc);
  }
  return out;
}

}  // namespace aat
