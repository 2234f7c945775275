#include "aat/data.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numeric>
#include <sstream>

#include "aat/errors.hpp"
#include "aat/json_io.hpp"
#include "aat/rng.hpp"

namespace aat {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(path.string() + ": truncated header (" + std::to_string(bytes.size()) + " bytes)");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex_bytes(const std::vector<unsigned char>& bytes) {
  std::ostringstream out;
  for (std::size_t i = 0; i < 4 && i < bytes.size(); ++i) {
    if (i) out << ' ';
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(bytes[i]);
  }
  return out.str();
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

void Dataset::validate(float lo, float hi) const {
  if (images.size() != size() * sample_numel()) {
    throw FormatError("dataset holds " + std::to_string(images.size()) + " values for " + std::to_string(size()) +
                      " samples of " + std::to_string(sample_numel()));
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!(images[i] >= lo && images[i] <= hi)) {
      throw FormatError("pixel " + std::to_string(i) + " = " + std::to_string(images[i]) + " outside [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw FormatError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
  }
}

Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                       std::size_t num_classes) {
  const auto image_bytes = read_file(images_path);
  const auto label_bytes = read_file(labels_path);

  const auto image_magic = read_be32(image_bytes, 0, images_path);
  if (image_magic != kImageMagic) {
    throw FormatError(images_path.string() + ": bad IDX image magic, observed bytes " + hex_bytes(image_bytes) +
                      " (expected 00 00 08 03)");
  }
  const auto label_magic = read_be32(label_bytes, 0, labels_path);
  if (label_magic != kLabelMagic) {
    throw FormatError(labels_path.string() + ": bad IDX label magic, observed bytes " + hex_bytes(label_bytes) +
                      " (expected 00 00 08 01)");
  }
  const std::size_t count = read_be32(image_bytes, 4, images_path);
  const std::size_t rows = read_be32(image_bytes, 8, images_path);
  const std::size_t cols = read_be32(image_bytes, 12, images_path);
  const std::size_t label_count = read_be32(label_bytes, 4, labels_path);
  if (count != label_count) {
    throw FormatError("image/label count mismatch: " + std::to_string(count) + " images vs " +
                      std::to_string(label_count) + " labels");
  }
  if (rows == 0 || cols == 0 || count == 0) throw FormatError(images_path.string() + ": zero extent in header");
  const std::size_t pixels = count * rows * cols;
  if (image_bytes.size() != 16 + pixels) {
    throw FormatError(images_path.string() + ": expected " + std::to_string(16 + pixels) + " bytes, found " +
                      std::to_string(image_bytes.size()));
  }
  if (label_bytes.size() != 8 + count) {
    throw FormatError(labels_path.string() + ": expected " + std::to_string(8 + count) + " bytes, found " +
                      std::to_string(label_bytes.size()));
  }

  Dataset data;
  data.sample_shape = {1, rows, cols};
  data.num_classes = num_classes;
  data.split = images_path.filename().string();
  data.images.resize(pixels);
  for (std::size_t i = 0; i < pixels; ++i) data.images[i] = static_cast<float>(image_bytes[16 + i]) / 255.0f;
  data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) data.labels[i] = label_bytes[8 + i];
  data.validate();
  return data;
}

void write_mnist_idx(const Dataset& data, const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path) {
  data.validate();
  if (data.sample_shape[0] != 1) throw UsageError("IDX export supports single-channel images only");
  std::ofstream images(images_path, std::ios::binary);
  std::ofstream labels(labels_path, std::ios::binary);
  if (!images || !labels) throw IoError("cannot write IDX files next to " + images_path.string());
  write_be32(images, kImageMagic);
  write_be32(images, static_cast<std::uint32_t>(data.size()));
  write_be32(images, static_cast<std::uint32_t>(data.sample_shape[1]));
  write_be32(images, static_cast<std::uint32_t>(data.sample_shape[2]));
  for (float v : data.images) images.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
  write_be32(labels, kLabelMagic);
  write_be32(labels, static_cast<std::uint32_t>(data.size()));
  for (int label : data.labels) labels.put(static_cast<char>(label));
  if (!images || !labels) throw IoError("failed writing " + images_path.string());
}

Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& prefix) {
  auto data = load_mnist_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"));
  data.split = prefix;
  return data;
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed,
                                              bool shuffle) {
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  std::vector<std::size_t> order;
  if (shuffle) {
    order = permutation(dataset_size, seed);
  } else {
    order.resize(dataset_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < dataset_size; start += batch_size) {
    const std::size_t end = std::min(dataset_size, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Batch gather(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw UsageError("gather: empty index list");
  const std::size_t d = data.sample_numel();
  std::vector<float> values(indices.size() * d);
  Labels labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= data.size()) throw UsageError("gather: index " + std::to_string(indices[i]) + " out of range");
    const auto img = data.image(indices[i]);
    std::copy(img.begin(), img.end(), values.begin() + static_cast<std::ptrdiff_t>(i * d));
    labels[i] = data.labels[indices[i]];
  }
  const auto& s = data.sample_shape;
  return {Tensor<float>({indices.size(), s[0], s[1], s[2]}, std::move(values)), std::move(labels),
          {indices.begin(), indices.end()}};
}

Dataset subset(const Dataset& data, std::size_t count, std::uint64_t seed) {
  const auto order = permutation(data.size(), seed);
  const std::size_t keep = (count == 0 || count >= data.size()) ? data.size() : count;
  Dataset out;
  out.sample_shape = data.sample_shape;
  out.num_classes = data.num_classes;
  out.split = data.split;
  out.images.reserve(keep * data.sample_numel());
  out.labels.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto img = data.image(order[i]);
    out.images.insert(out.images.end(), img.begin(), img.end());
    out.labels.push_back(data.labels[order[i]]);
  }
  return out;
}

Dataset load_digit_json(const std::filesystem::path& dir) {
  constexpr std::size_t kPixels = 28 * 28;
  Dataset out;
  out.split = "digits";
  for (int digit = 0; digit < 10; ++digit) {
    const auto path = dir / (std::to_string(digit) + ".json");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw FormatError(path.string() + ": malformed JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("data") || !j["data"].is_array()) {
      throw FormatError(path.string() + ": expected an object with a \"data\" array");
    }
    const auto& values = j["data"];
    if (values.size() % kPixels != 0) {
      throw FormatError(path.string() + ": " + std::to_string(values.size()) + " values is not a multiple of 784");
    }
    for (const auto& v : values) {
      if (!v.is_number()) throw FormatError(path.string() + ": non-numeric pixel");
      const double x = v.get<double>();
      if (!(x >= 0 && x <= 1)) throw FormatError(path.string() + ": pixel outside [0, 1]");
      out.images.push_back(static_cast<float>(std::lround(x * 255.0)) / 255.0f);
    }
    out.labels.insert(out.labels.end(), values.size() / kPixels, digit);
  }
  return out;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& data, std::size_t holdout, std::uint64_t seed) {
  if (holdout > data.size()) throw ValidationError("holdout larger than the dataset");
  const auto shuffled = subset(data, 0, seed);
  const std::size_t keep = data.size() - holdout;
  const std::size_t d = data.sample_numel();
  auto part = [&](std::size_t begin, std::size_t end) {
    Dataset out;
    out.sample_shape = data.sample_shape;
    out.num_classes = data.num_classes;
    out.split = data.split;
    out.images.assign(shuffled.images.begin() + static_cast<std::ptrdiff_t>(begin * d),
                      shuffled.images.begin() + static_cast<std::ptrdiff_t>(end * d));
    out.labels.assign(shuffled.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      shuffled.labels.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
  };
  return {part(0, keep), part(keep, data.size())};
}

std::filesystem::path resolve_data_dir(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv("AAT_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return "data";
}

}  // namespace aat
