#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "aat/checkpoint.hpp"
#include "aat/data.hpp"
#include "aat/errors.hpp"
#include "aat/json_io.hpp"
#include "test_util.hpp"

namespace aat {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("aat_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Dataset tiny_images(std::size_t n, std::uint64_t seed) {
  Dataset d;
  d.sample_shape = {1, 3, 4};
  Rng rng(seed);
  for (std::size_t i = 0; i < n * 12; ++i) d.images.push_back(static_cast<float>(rng.below(256)) / 255.0f);
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(rng.below(10)));
  return d;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TEST(IdxTest, RoundTripIsExact) {
  TempDir tmp;
  const auto data = tiny_images(7, 1);
  write_mnist_idx(data, tmp.path() / "img", tmp.path() / "lbl");
  const auto back = load_mnist_idx(tmp.path() / "img", tmp.path() / "lbl");
  EXPECT_EQ(back.sample_shape, data.sample_shape);
  EXPECT_EQ(back.labels, data.labels);
  EXPECT_EQ(back.images, data.images);
}

TEST(IdxTest, HeaderBytesAreBigEndian) {
  TempDir tmp;
  write_mnist_idx(tiny_images(2, 1), tmp.path() / "img", tmp.path() / "lbl");
  const auto img = read_bytes(tmp.path() / "img");
  ASSERT_EQ(img.size(), 16u + 24u);
  EXPECT_EQ(std::vector<std::uint8_t>(img.begin(), img.begin() + 16),
            (std::vector<std::uint8_t>{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 4}));
}

TEST(IdxTest, BadMagicReportsObservedBytes) {
  TempDir tmp;
  write_mnist_idx(tiny_images(2, 1), tmp.path() / "img", tmp.path() / "lbl");
  auto bytes = read_bytes(tmp.path() / "img");
  bytes[3] = 0x42;
  write_bytes(tmp.path() / "img", bytes);
  try {
    load_mnist_idx(tmp.path() / "img", tmp.path() / "lbl");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("42"), std::string::npos) << e.what();
  }
}

TEST(IdxTest, TruncationAndCountMismatchAreFormatErrors) {
  TempDir tmp;
  write_mnist_idx(tiny_images(3, 1), tmp.path() / "img", tmp.path() / "lbl");
  auto bytes = read_bytes(tmp.path() / "img");
  bytes.pop_back();
  write_bytes(tmp.path() / "trunc", bytes);
  EXPECT_THROW(load_mnist_idx(tmp.path() / "trunc", tmp.path() / "lbl"), FormatError);
  write_bytes(tmp.path() / "short", {0, 0, 8});
  EXPECT_THROW(load_mnist_idx(tmp.path() / "short", tmp.path() / "lbl"), FormatError);

  write_mnist_idx(tiny_images(2, 1), tmp.path() / "img2", tmp.path() / "lbl2");
  EXPECT_THROW(load_mnist_idx(tmp.path() / "img", tmp.path() / "lbl2"), FormatError);
  EXPECT_THROW(load_mnist_idx(tmp.path() / "missing", tmp.path() / "lbl"), IoError);
}

TEST(IdxTest, LabelOutsideClassRangeIsFormatError) {
  TempDir tmp;
  auto data = tiny_images(3, 1);
  data.labels[1] = 9;
  write_mnist_idx(data, tmp.path() / "img", tmp.path() / "lbl");
  EXPECT_THROW(load_mnist_idx(tmp.path() / "img", tmp.path() / "lbl", 5), FormatError);
}

TEST(BatchTest, BatchesPartitionTheIndices) {
  for (bool shuffle : {false, true}) {
    const auto b = batches(103, 10, 4, shuffle);
    ASSERT_EQ(b.size(), 11u);
    EXPECT_EQ(b.back().size(), 3u);
    std::set<std::size_t> seen;
    for (const auto& batch : b) seen.insert(batch.begin(), batch.end());
    EXPECT_EQ(seen.size(), 103u);
    EXPECT_EQ(*seen.rbegin(), 102u);
  }
  EXPECT_EQ(batches(10, 3, 1, true), batches(10, 3, 1, true));
  EXPECT_NE(batches(50, 50, 1, true), batches(50, 50, 2, true));
  EXPECT_THROW(batches(10, 0, 0, false), ValidationError);
}

TEST(BatchTest, GatherCopiesImagesAndLabels) {
  const auto data = tiny_images(5, 2);
  const std::vector<std::size_t> idx{4, 0};
  const auto b = gather(data, idx);
  EXPECT_EQ(b.x.shape(), (Shape{2, 1, 3, 4}));
  EXPECT_EQ(b.y, (Labels{data.labels[4], data.labels[0]}));
  for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(b.x.values()[k], data.images[4 * 12 + k]);
  const std::vector<std::size_t> bad{5};
  EXPECT_THROW(gather(data, bad), UsageError);
}

TEST(SubsetTest, SeededSubsetAndHoldout) {
  const auto data = tiny_images(20, 3);
  const auto a = subset(data, 8, 5);
  EXPECT_EQ(a.size(), 8u);
  EXPECT_EQ(a.images, subset(data, 8, 5).images);
  EXPECT_EQ(subset(data, 0, 5).size(), 20u);

  const auto [train, held] = split_holdout(data, 6, 9);
  EXPECT_EQ(train.size(), 14u);
  EXPECT_EQ(held.size(), 6u);
  std::multiset<int> all(data.labels.begin(), data.labels.end());
  std::multiset<int> parts(train.labels.begin(), train.labels.end());
  parts.insert(held.labels.begin(), held.labels.end());
  EXPECT_EQ(all, parts);
  EXPECT_THROW(split_holdout(data, 21, 0), ValidationError);
}

TEST(DigitJsonTest, LoadsAndRequantizes) {
  TempDir tmp;
  for (int digit = 0; digit < 10; ++digit) {
    Json j;
    std::vector<double> px(784 * (digit == 3 ? 2 : 1), 0.0);
    px[0] = 128.0 / 255.0 + 1e-9;
    j["data"] = px;
    std::ofstream(tmp.path() / (std::to_string(digit) + ".json")) << j.dump();
  }
  const auto data = load_digit_json(tmp.path());
  EXPECT_EQ(data.size(), 11u);
  EXPECT_EQ(data.labels[3], 3);
  EXPECT_EQ(data.labels[4], 3);
  EXPECT_EQ(data.images[0], 128.0f / 255.0f);

  std::ofstream(tmp.path() / "5.json") << R"({"data": [0.5, 0.2]})";
  EXPECT_THROW(load_digit_json(tmp.path()), FormatError);
  fs::remove(tmp.path() / "5.json");
  EXPECT_THROW(load_digit_json(tmp.path()), IoError);
}

BackboneSpec small_spec() {
  BackboneSpec spec;
  spec.input_shape = {1, 8, 8};
  spec.conv_channels = {2};
  spec.kernel = 3;
  spec.latent_dim = 5;
  spec.num_classes = 3;
  return spec;
}

CheckpointMeta sample_meta() {
  CheckpointMeta meta;
  meta.config_hash = "0123456789abcdef";
  meta.epoch = 3;
  meta.seed = 11;
  meta.extra = Json{{"name", "unit"}};
  return meta;
}

TEST(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  TempDir tmp;
  const auto m = Model::init(small_spec(), 4);
  save_checkpoint(m, sample_meta(), tmp.path() / "a.aatd");
  const auto loaded = load_checkpoint(tmp.path() / "a.aatd");
  save_checkpoint(loaded.model, loaded.meta, tmp.path() / "b.aatd");
  EXPECT_EQ(read_bytes(tmp.path() / "a.aatd"), read_bytes(tmp.path() / "b.aatd"));
  EXPECT_EQ(loaded.meta.config_hash, "0123456789abcdef");
  EXPECT_EQ(loaded.meta.epoch, 3u);
  EXPECT_EQ(loaded.meta.seed, 11u);
  EXPECT_EQ(loaded.meta.extra["name"], "unit");
  EXPECT_FALSE(fs::exists(tmp.path() / "a.aatd.tmp"));
}

TEST(CheckpointTest, ReloadedModelPredictsBitIdentically) {
  TempDir tmp;
  const auto m = Model::init(small_spec(), 5);
  save_checkpoint(m, sample_meta(), tmp.path() / "m.aatd");
  auto other = Model::init(small_spec(), 99);
  load_checkpoint_into(other, tmp.path() / "m.aatd");
  Rng rng(6);
  const auto x = testing::random_tensor<float>({4, 1, 8, 8}, rng, 0, 1, false);
  NoGradGuard no_grad;
  for (auto way : {Way::kStandard, Way::kRobust, Way::kNonRobust}) {
    const auto a = m.forward_way(x, way);
    const auto b = other.forward_way(x, way);
    EXPECT_EQ(std::vector<float>(a.values().begin(), a.values().end()),
              std::vector<float>(b.values().begin(), b.values().end()));
  }
}

TEST(CheckpointTest, MismatchedModelNamesBothShapes) {
  TempDir tmp;
  save_checkpoint(Model::init(small_spec(), 5), sample_meta(), tmp.path() / "m.aatd");
  auto spec = small_spec();
  spec.latent_dim = 7;
  auto other = Model::init(spec, 1);
  try {
    load_checkpoint_into(other, tmp.path() / "m.aatd");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[5,"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[7,"), std::string::npos) << msg;
  }
}

TEST(CheckpointTest, CorruptBytesAreFormatErrors) {
  const auto bytes = encode_checkpoint(Model::init(small_spec(), 5), sample_meta());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(decode_checkpoint(bad_version), FormatError);
  EXPECT_THROW(decode_checkpoint(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 5)), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), FormatError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.aatd"), IoError);
}

}  // namespace
}  // namespace aat
