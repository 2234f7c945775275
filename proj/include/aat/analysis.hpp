#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aat/model.hpp"

namespace aat {

struct Provenance {
  std::size_t sample_id = 0;
  std::string way;
  std::string operation;
};

// Pixels stored CHW in [0, 1].
struct ImageArtifact {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;
  Provenance provenance;
  bool degenerate = false;  // set when the source had zero variance
};

// Clips to mean +- 3 std, then maps min -> 0 and max -> 1. A constant input
// maps to 0.5 everywhere and sets *degenerate.
std::vector<float> rescale_for_display(std::span<const float> values, bool* degenerate = nullptr);

// Gradient of the way's cross-entropy with respect to a single input [1,C,H,W].
std::vector<float> input_gradient(const Model& model, const Tensor<float>& x, int label, Way way);

ImageArtifact grad_visual(const Model& model, const Tensor<float>& x, int label, Way way, std::size_t sample_id = 0);

struct InversionOptions {
  std::size_t steps = 2000;
  double lr = 1.0;
  std::uint64_t seed = 0;
  std::size_t log_every = 100;
};

struct InversionResult {
  ImageArtifact image;
  double initial_distance = 0;
  double final_distance = 0;
  double final_lr = 0;
  std::vector<std::pair<std::size_t, double>> history;  // (step, distance), non-increasing
};

// Gradient descent on ||encode(candidate) - target_z||^2 from seeded uniform
// noise, clamped to [0, 1]. A step that would raise the distance is rejected
// and the step size halved.
InversionResult invert_representation(const Model& model, const Tensor<float>& target_z, Branch branch,
                                      const InversionOptions& options, std::size_t sample_id = 0);

// ||a - b||^2 / ||b||^2.
double relative_distance(std::span<const float> a, std::span<const float> b);

// Binary PGM (one channel) or PPM (three channels), 8-bit, pixel = round(255 v).
void write_image(const ImageArtifact& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_image(const ImageArtifact& image);

}  // namespace aat
