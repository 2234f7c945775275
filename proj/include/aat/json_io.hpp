#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "aat/attack.hpp"
#include "aat/model.hpp"
#include "json.hpp"

namespace aat {

using Json = nlohmann::json;

// Strict view over one JSON object: every accessor records the key it read and
// finish() rejects whatever was not read. Errors name the full key path.
class ObjectReader {
 public:
  ObjectReader(const Json& object, std::string path);

  bool has(const std::string& key) const;
  const Json& raw(const std::string& key);

  double number(const std::string& key, double fallback, double lo, double hi);
  std::uint64_t u64(const std::string& key, std::uint64_t fallback);
  std::size_t count(const std::string& key, std::size_t fallback, std::size_t lo, std::size_t hi);
  bool boolean(const std::string& key, bool fallback);
  std::string string(const std::string& key, const std::string& fallback);
  std::vector<std::size_t> counts(const std::string& key, const std::vector<std::size_t>& fallback);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback);

  std::string child_path(const std::string& key) const { return path_ + "." + key; }
  void finish() const;

 private:
  const Json* find(const std::string& key);
  const Json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

Json to_json(const BackboneSpec& spec);
BackboneSpec backbone_from_json(const Json& j, const std::string& path = "model");

Json to_json(const AttackConfig& cfg);
AttackConfig attack_from_json(const Json& j, const std::string& path = "attack");

// FNV-1a over a byte string, hex-encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace aat
