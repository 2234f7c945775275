#include "aat/json_io.hpp"

#include <cmath>
#include <cstdio>

#include "aat/errors.hpp"

namespace aat {

ObjectReader::ObjectReader(const Json& object, std::string path) : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
}

bool ObjectReader::has(const std::string& key) const { return object_.contains(key); }

const Json* ObjectReader::find(const std::string& key) {
  seen_.insert(key);
  auto it = object_.find(key);
  return it == object_.end() ? nullptr : &*it;
}

const Json& ObjectReader::raw(const std::string& key) {
  const Json* v = find(key);
  if (v == nullptr) throw ConfigError(child_path(key) + ": missing");
  return *v;
}

double ObjectReader::number(const std::string& key, double fallback, double lo, double hi) {
  const Json* v = find(key);
  if (v == nullptr) return fallback;
  if (!v->is_number()) throw ConfigError(child_path(key) + ": expected a number");
  const double x = v->get<double>();
  if (!std::isfinite(x) || x < lo || x > hi) {
    throw ConfigError(child_path(key) + ": " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  return x;
}

std::uint64_t ObjectReader::u64(const std::string& key, std::uint64_t fallback) {
  const Json* v = find(key);
  if (v == nullptr) return fallback;
  if (!v->is_number_unsigned()) throw ConfigError(child_path(key) + ": expected a non-negative integer");
  return v->get<std::uint64_t>();
}

std::size_t ObjectReader::count(const std::string& key, std::size_t fallback, std::size_t lo, std::size_t hi) {
  const Json* v = find(key);
  if (v == nullptr) return fallback;
  if (!v->is_number_unsigned()) throw ConfigError(child_path(key) + ": expected a non-negative integer");
  const auto x = v->get<std::uint64_t>();
  if (x < lo || x > hi) {
    throw ConfigError(child_path(key) + ": " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  return static_cast<std::size_t>(x);
}

bool ObjectReader::boolean(const std::string& key, bool fallback) {
  const Json* v = find(key);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) throw ConfigError(child_path(key) + ": expected true or false");
  return v->get<bool>();
}

std::string ObjectReader::string(const std::string& key, const std::string& fallback) {
  const Json* v = find(key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) throw ConfigError(child_path(key) + ": expected a string");
  return v->get<std::string>();
}

std::vector<std::size_t> ObjectReader::counts(const std::string& key, const std::vector<std::size_t>& fallback) {
  const Json* v = find(key);
  if (v == nullptr) return fallback;
  if (!v->is_array()) throw ConfigError(child_path(key) + ": expected an array of integers");
  std::vector<std::size_t> out;
  for (const auto& e : *v) {
    if (!e.is_number_unsigned()) throw ConfigError(child_path(key) + ": expected non-negative integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

std::vector<double> ObjectReader::numbers(const std::string& key, const std::vector<double>& fallback) {
  const Json* v = find(key);
  if (v == nullptr) return fallback;
  if (!v->is_array()) throw ConfigError(child_path(key) + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number() || !std::isfinite(e.get<double>())) {
      throw ConfigError(child_path(key) + ": expected finite numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::string> ObjectReader::strings(const std::string& key, const std::vector<std::string>& fallback) {
  const Json* v = find(key);
  if (v == nullptr) return fallback;
  if (!v->is_array()) throw ConfigError(child_path(key) + ": expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : *v) {
    if (!e.is_string()) throw ConfigError(child_path(key) + ": expected strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

void ObjectReader::finish() const {
  for (auto it = object_.begin(); it != object_.end(); ++it) {
    if (!seen_.count(it.key())) throw ConfigError(child_path(it.key()) + ": unknown key");
  }
}

Json to_json(const BackboneSpec& spec) {
  Json j;
  j["kind"] = to_string(spec.kind);
  j["input_shape"] = {spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  j["conv_channels"] = spec.conv_channels;
  j["kernel"] = spec.kernel;
  j["hidden"] = spec.hidden;
  j["latent_dim"] = spec.latent_dim;
  j["num_classes"] = spec.num_classes;
  j["input_scale"] = spec.input_scale;
  return j;
}

BackboneSpec backbone_from_json(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  const auto kind = parse_backbone_kind(r.string("kind", "small-cnn"));
  BackboneSpec spec = kind == BackboneKind::kSmallCnn ? BackboneSpec::mnist_cnn() : BackboneSpec::mlp(7, 2);
  const auto shape = r.counts("input_shape", {spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]});
  if (shape.size() != 3) throw ConfigError(r.child_path("input_shape") + ": expected [C, H, W]");
  spec.input_shape = {shape[0], shape[1], shape[2]};
  spec.conv_channels = r.counts("conv_channels", spec.conv_channels);
  spec.kernel = r.count("kernel", spec.kernel, 1, 64);
  spec.hidden = r.counts("hidden", spec.hidden);
  spec.latent_dim = r.count("latent_dim", spec.latent_dim, 1, 1 << 16);
  spec.num_classes = r.count("num_classes", spec.num_classes, 2, 1 << 16);
  const auto scale = r.numbers("input_scale", {});
  spec.input_scale.assign(scale.begin(), scale.end());
  r.finish();
  try {
    spec.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return spec;
}

Json to_json(const AttackConfig& cfg) {
  Json j;
  j["norm"] = to_string(cfg.norm);
  j["epsilon"] = cfg.epsilon;
  j["alpha"] = cfg.alpha;
  j["steps"] = cfg.steps;
  j["random_start"] = cfg.random_start;
  j["clamp"] = cfg.clamp;
  return j;
}

AttackConfig attack_from_json(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  AttackConfig cfg;
  try {
    cfg.norm = parse_norm(r.string("norm", "l2"));
  } catch (const ValidationError& e) {
    throw ConfigError(r.child_path("norm") + ": " + e.what());
  }
  cfg.epsilon = r.number("epsilon", cfg.epsilon, 0.0, 1e6);
  cfg.alpha = r.number("alpha", cfg.alpha, 1e-12, 1e6);
  cfg.steps = r.count("steps", cfg.steps, 0, 100000);
  cfg.random_start = r.boolean("random_start", cfg.random_start);
  cfg.clamp = r.boolean("clamp", cfg.clamp);
  r.finish();
  return cfg;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aat
