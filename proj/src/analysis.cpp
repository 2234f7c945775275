#include "aat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "aat/errors.hpp"
#include "aat/ops.hpp"
#include "aat/rng.hpp"

namespace aat {

std::vector<float> rescale_for_display(std::span<const float> values, bool* degenerate) {
  if (degenerate) *degenerate = false;
  if (values.empty()) return {};
  double mean = 0;
  for (float v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0;
  for (float v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(values.size()));

  std::vector<double> clipped(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) clipped[i] = std::clamp<double>(values[i], mean - 3 * sd, mean + 3 * sd);
  const auto [lo, hi] = std::minmax_element(clipped.begin(), clipped.end());
  const double range = *hi - *lo;
  if (sd == 0 || range == 0) {
    if (degenerate) *degenerate = true;
    return std::vector<float>(values.size(), 0.5f);
  }
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(static_cast<float>((clipped[i] - *lo) / range), 0.0f, 1.0f);
  }
  return out;
}

namespace {

void require_single(const Model& model, const Tensor<float>& x, const char* what) {
  const auto& s = model.spec().input_shape;
  if (x.shape() != Shape{1, s[0], s[1], s[2]}) {
    throw DimensionError(std::string(what) + ": expected one input of shape " +
                         shape_string({1, s[0], s[1], s[2]}) + ", got " + shape_string(x.shape()));
  }
}

}  // namespace

std::vector<float> input_gradient(const Model& model, const Tensor<float>& x, int label, Way way) {
  require_single(model, x, "input_gradient");
  const Model frozen = model.frozen();
  Tensor<float> input(x.shape(), std::vector<float>(x.values().begin(), x.values().end()), true);
  const Labels y{label};
  backward(ops::cross_entropy(frozen.forward_way(input, way), y));
  return {input.grad().begin(), input.grad().end()};
}

ImageArtifact grad_visual(const Model& model, const Tensor<float>& x, int label, Way way, std::size_t sample_id) {
  const auto grad = input_gradient(model, x, label, way);
  ImageArtifact image;
  image.channels = x.size(1);
  image.height = x.size(2);
  image.width = x.size(3);
  image.pixels = rescale_for_display(grad, &image.degenerate);
  image.provenance = {sample_id, to_string(way), "grad-viz"};
  return image;
}

double relative_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("relative_distance: size mismatch");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
    den += static_cast<double>(b[i]) * b[i];
  }
  return den > 0 ? num / den : num;
}

InversionResult invert_representation(const Model& model, const Tensor<float>& target_z, Branch branch,
                                      const InversionOptions& options, std::size_t sample_id) {
  if (!(options.lr > 0) || !std::isfinite(options.lr)) throw ValidationError("inversion lr must be positive");
  const auto& s = model.spec().input_shape;
  const Shape shape{1, s[0], s[1], s[2]};
  const Model frozen = model.frozen();
  const Tensor<float> target = target_z.detach();

  Rng rng(options.seed);
  std::vector<float> x(shape_numel(shape));
  for (auto& v : x) v = static_cast<float>(rng.uniform());

  auto evaluate = [&](const std::vector<float>& values, std::vector<float>& grad) {
    Tensor<float> input(shape, values, true);
    const auto z = frozen.encode(input, branch);
    if (z.shape() != target.shape()) {
      throw DimensionError("invert_representation: target shape " + shape_string(target.shape()) +
                           " but representation shape " + shape_string(z.shape()));
    }
    const auto loss = ops::squared_distance(z, target);
    backward(loss);
    grad.assign(input.grad().begin(), input.grad().end());
    return static_cast<double>(loss.item());
  };

  InversionResult result;
  std::vector<float> grad, trial_grad, trial(x.size());
  double dist = evaluate(x, grad);
  if (!std::isfinite(dist)) throw NumericError("inversion distance is non-finite at step 0");
  result.initial_distance = dist;
  result.history.emplace_back(0, dist);
  double lr = options.lr;
  for (std::size_t step = 1; step <= options.steps; ++step) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      trial[i] = std::clamp(x[i] - static_cast<float>(lr) * grad[i], 0.0f, 1.0f);
    }
    const double next = evaluate(trial, trial_grad);
    if (!std::isfinite(next)) throw NumericError("inversion distance is non-finite at step " + std::to_string(step));
    if (next <= dist) {
      x.swap(trial);
      grad.swap(trial_grad);
      dist = next;
    } else {
      lr *= 0.5;
    }
    if (options.log_every > 0 && step % options.log_every == 0) result.history.emplace_back(step, dist);
  }
  result.final_distance = dist;
  result.final_lr = lr;
  result.image.channels = s[0];
  result.image.height = s[1];
  result.image.width = s[2];
  result.image.pixels = std::move(x);
  result.image.provenance = {sample_id, branch == Branch::kRobust ? "robust" : "nonrobust", "invert"};
  return result;
}

std::vector<std::uint8_t> encode_image(const ImageArtifact& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw DimensionError("images need 1 or 3 channels, got " + std::to_string(image.channels));
  }
  const std::size_t plane = image.height * image.width;
  if (image.pixels.size() != plane * image.channels) throw DimensionError("image pixel count mismatch");
  const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(image.width) +
                             " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < image.channels; ++c) {
      const float v = std::clamp(image.pixels[c * plane + p], 0.0f, 1.0f);
      out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    }
  }
  return out;
}

void write_image(const ImageArtifact& image, const std::filesystem::path& path) {
  const auto bytes = encode_image(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace aat
