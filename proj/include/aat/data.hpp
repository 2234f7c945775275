#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aat/tensor.hpp"

namespace aat {

// Images stored NCHW as floats in [0, 1] with one class index per image.
struct Dataset {
  std::array<std::size_t, 3> sample_shape{1, 28, 28};
  std::vector<float> images;
  Labels labels;
  std::size_t num_classes = 10;
  std::string split;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_numel() const { return sample_shape[0] * sample_shape[1] * sample_shape[2]; }
  std::span<const float> image(std::size_t i) const { return {images.data() + i * sample_numel(), sample_numel()}; }

  // Checks the size relation, pixel range [lo, hi] and label range.
  void validate(float lo = 0.0f, float hi = 1.0f) const;
};

struct Batch {
  Tensor<float> x;
  Labels y;
  std::vector<std::size_t> indices;
};

// Parses an IDX image file (magic 0x00000803, u8 pixels scaled by 1/255) and
// an IDX label file (magic 0x00000801). All-or-nothing: any inconsistency
// raises FormatError and no dataset is returned.
Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                       std::size_t num_classes = 10);

// Writes the dataset as IDX files; pixels are quantized to round(255 * v).
void write_mnist_idx(const Dataset& data, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path);

// Loads `<dir>/<prefix>-images-idx3-ubyte` and `<dir>/<prefix>-labels-idx1-ubyte`
// (prefix "train" or "t10k").
Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& prefix);

// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

// Index batches in order (or in seeded-shuffled order); the last batch may be
// shorter.
std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed,
                                              bool shuffle);

Batch gather(const Dataset& data, std::span<const std::size_t> indices);

// First `count` samples after a seeded shuffle; count 0 or >= size keeps all
// samples (in shuffled order).
Dataset subset(const Dataset& data, std::size_t count, std::uint64_t seed);

// Reads `0.json` .. `9.json` from a directory, each {"data": [...]} holding
// the flattened 28x28 images of one digit with values v/255 (as published
// by the npm `mnist` package). Pixels are requantized to round(255 v) / 255.
Dataset load_digit_json(const std::filesystem::path& dir);

// Seeded shuffle, then the last `holdout` samples form the second set.
std::pair<Dataset, Dataset> split_holdout(const Dataset& data, std::size_t holdout, std::uint64_t seed);

// Resolves the dataset directory: explicit value, then AAT_DATA_DIR, then "data".
std::filesystem::path resolve_data_dir(const std::string& configured);

}  // namespace aat
