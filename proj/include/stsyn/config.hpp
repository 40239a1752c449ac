#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "stsyn/simulator.hpp"

namespace stsyn {

// Config problem tied to a specific key ("section.key").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Flat `[section]` / `key = value` text. Keys are addressed as
// "section.key"; getters record consumption so leftover keys can be
// rejected by name.
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path);
  static ConfigMap parse_string(const std::string& text);

  bool contains(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key);
  std::string get_string_or(const std::string& key, const std::string& fallback);
  long get_long(const std::string& key);
  long get_long_or(const std::string& key, long fallback);
  uint64_t get_u64(const std::string& key);
  uint64_t get_u64_or(const std::string& key, uint64_t fallback);
  double get_double(const std::string& key);
  double get_double_or(const std::string& key, double fallback);
  bool get_bool_or(const std::string& key, bool fallback);
  std::optional<uint64_t> maybe_u64(const std::string& key);
  std::optional<double> maybe_double(const std::string& key);
  std::optional<std::string> maybe_string(const std::string& key);

  // Throws ConfigError naming the first unconsumed key.
  void require_all_consumed() const;

 private:
  std::string take(const std::string& key);
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

ExperimentConfig config_from_map(ConfigMap& map);
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// Canonical serialization: sorted keys, shortest round-trip numbers. Equal
// configs produce identical text; the hash is FNV-1a over it.
std::string canonical_config_text(const ExperimentConfig& cfg);
uint64_t config_hash(const ExperimentConfig& cfg);
std::string config_hash_hex(const ExperimentConfig& cfg);

// Shortest round-trip decimal formatting used across all emitted files.
std::string format_double(double x);

}  // namespace stsyn
