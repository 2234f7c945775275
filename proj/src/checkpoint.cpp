#include "aat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "aat/errors.hpp"

namespace aat {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { bytes(&v, 2); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& in, std::string origin) : in_(in), origin_(std::move(origin)) {}
  void bytes(void* dst, std::size_t n) {
    if (pos_ + n > in_.size()) throw FormatError(origin_ + ": truncated at byte " + std::to_string(pos_));
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint16_t u16() {
    std::uint16_t v;
    bytes(&v, 2);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  bool done() const { return pos_ == in_.size(); }
  const std::string& origin() const { return origin_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::string origin_;
  std::size_t pos_ = 0;
};

struct StoredTensor {
  Shape shape;
  std::vector<float> values;
};

struct Decoded {
  std::vector<std::pair<std::string, StoredTensor>> tensors;
  Json meta;
};

Decoded decode_raw(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "AATD", 4) != 0) throw FormatError(origin + ": not an AATD checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  Decoded out;
  const auto count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name(r.u16(), '\0');
    r.bytes(name.data(), name.size());
    StoredTensor st;
    const auto ndim = r.u8();
    for (std::uint8_t d = 0; d < ndim; ++d) st.shape.push_back(r.u32());
    st.values.resize(shape_numel(st.shape));
    r.bytes(st.values.data(), st.values.size() * sizeof(float));
    out.tensors.emplace_back(std::move(name), std::move(st));
  }
  std::string meta(r.u32(), '\0');
  r.bytes(meta.data(), meta.size());
  if (!r.done()) throw FormatError(origin + ": trailing bytes after metadata");
  try {
    out.meta = Json::parse(meta);
  } catch (const Json::exception& e) {
    throw FormatError(origin + ": metadata is not valid JSON: " + e.what());
  }
  return out;
}

CheckpointMeta meta_from_json(const Json& j, const std::string& origin) {
  try {
    CheckpointMeta meta;
    meta.config_hash = j.at("config_hash").get<std::string>();
    meta.epoch = j.at("epoch").get<std::size_t>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.extra = j.value("extra", Json::object());
    return meta;
  } catch (const Json::exception& e) {
    throw FormatError(origin + ": malformed metadata: " + e.what());
  }
}

void copy_into(Model& model, const Decoded& decoded, const std::string& origin) {
  auto params = model.parameters();
  if (params.size() != decoded.tensors.size()) {
    throw FormatError(origin + ": checkpoint has " + std::to_string(decoded.tensors.size()) +
                      " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, stored] = decoded.tensors[i];
    if (name != params[i].name) {
      throw FormatError(origin + ": tensor " + std::to_string(i) + " is '" + name + "', model expects '" +
                        params[i].name + "'");
    }
    if (stored.shape != params[i].tensor.shape()) {
      throw FormatError(origin + ": tensor '" + name + "' has checkpoint shape " + shape_string(stored.shape) +
                        " but model shape " + shape_string(params[i].tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    std::copy(decoded.tensors[i].second.values.begin(), decoded.tensors[i].second.values.end(), dst.begin());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const CheckpointMeta& meta) {
  Writer w;
  w.bytes("AATD", 4);
  w.u32(kCheckpointVersion);
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    const auto& shape = p.tensor.shape();
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto extent : shape) w.u32(static_cast<std::uint32_t>(extent));
    w.bytes(p.tensor.values().data(), p.tensor.numel() * sizeof(float));
  }
  Json j;
  j["format"] = "aatd";
  j["backbone"] = to_json(model.spec());
  j["config_hash"] = meta.config_hash;
  j["epoch"] = meta.epoch;
  j["seed"] = meta.seed;
  j["extra"] = meta.extra;
  const std::string text = j.dump();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  return w.take();
}

void save_checkpoint(const Model& model, const CheckpointMeta& meta, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model, meta);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

LoadedCheckpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  const auto decoded = decode_raw(bytes, origin);
  BackboneSpec spec;
  try {
    spec = backbone_from_json(decoded.meta.at("backbone"), "backbone");
  } catch (const Json::exception& e) {
    throw FormatError(origin + ": metadata lacks a backbone description");
  } catch (const ConfigError& e) {
    throw FormatError(origin + ": " + e.what());
  }
  auto model = Model::init(spec, 0);
  copy_into(model, decoded, origin);
  return {std::move(model), meta_from_json(decoded.meta, origin)};
}

namespace {
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
}  // namespace

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_bytes(path), path.string());
}

CheckpointMeta load_checkpoint_into(Model& model, const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  const auto decoded = decode_raw(bytes, path.string());
  copy_into(model, decoded, path.string());
  return meta_from_json(decoded.meta, path.string());
}

}  // namespace aat
