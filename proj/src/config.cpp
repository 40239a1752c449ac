#include "stsyn/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace stsyn {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

ConfigMap ConfigMap::parse_string(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::string section;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": malformed section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (map.values_.count(full)) throw ConfigError(full, "duplicate key");
    map.values_[full] = value;
  }
  return map;
}

std::string ConfigMap::take(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "missing required key");
  consumed_.insert(key);
  return it->second;
}

std::string ConfigMap::get_string(const std::string& key) { return take(key); }

std::string ConfigMap::get_string_or(const std::string& key, const std::string& fallback) {
  if (!contains(key)) return fallback;
  return take(key);
}

long ConfigMap::get_long(const std::string& key) {
  const std::string v = take(key);
  try {
    size_t used = 0;
    const long out = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
}

long ConfigMap::get_long_or(const std::string& key, long fallback) {
  if (!contains(key)) return fallback;
  return get_long(key);
}

uint64_t ConfigMap::get_u64(const std::string& key) {
  const std::string v = take(key);
  try {
    size_t used = 0;
    const unsigned long long out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
  }
}

uint64_t ConfigMap::get_u64_or(const std::string& key, uint64_t fallback) {
  if (!contains(key)) return fallback;
  return get_u64(key);
}

double ConfigMap::get_double(const std::string& key) {
  const std::string v = take(key);
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

double ConfigMap::get_double_or(const std::string& key, double fallback) {
  if (!contains(key)) return fallback;
  return get_double(key);
}

bool ConfigMap::get_bool_or(const std::string& key, bool fallback) {
  if (!contains(key)) return fallback;
  const std::string v = take(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected a boolean, got '" + v + "'");
}

std::optional<uint64_t> ConfigMap::maybe_u64(const std::string& key) {
  if (!contains(key)) return std::nullopt;
  return get_u64(key);
}

std::optional<double> ConfigMap::maybe_double(const std::string& key) {
  if (!contains(key)) return std::nullopt;
  return get_double(key);
}

std::optional<std::string> ConfigMap::maybe_string(const std::string& key) {
  if (!contains(key)) return std::nullopt;
  return take(key);
}

void ConfigMap::require_all_consumed() const {
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) throw ConfigError(key, "unknown key");
  }
}

namespace {

DatasetSpec dataset_from_map(ConfigMap& map) {
  DatasetSpec spec;
  const std::string kind = map.get_string("objective.kind");
  if (kind == "synthetic-quadratic") {
    spec.kind = DatasetSpec::Kind::synthetic_quadratic;
  } else if (kind == "synthetic-logistic") {
    spec.kind = DatasetSpec::Kind::synthetic_logistic;
  } else if (kind == "file") {
    spec.kind = DatasetSpec::Kind::file;
  } else {
    throw ConfigError("objective.kind", "unknown dataset kind '" + kind + "'");
  }

  if (spec.kind == DatasetSpec::Kind::file) {
    spec.path = map.get_string("objective.path");
    const std::string fmt = map.get_string_or("objective.format", "csv");
    if (fmt == "csv") {
      spec.format = DatasetSpec::FileFormat::csv;
    } else if (fmt == "idx") {
      spec.format = DatasetSpec::FileFormat::idx;
    } else {
      throw ConfigError("objective.format", "expected csv or idx, got '" + fmt + "'");
    }
    spec.labels_path = map.get_string_or("objective.labels_path", "");
    const std::string obj = map.get_string_or("objective.objective", "logistic");
    if (obj == "logistic") {
      spec.file_objective = ObjectiveKind::logistic;
    } else if (obj == "quadratic") {
      spec.file_objective = ObjectiveKind::quadratic;
    } else {
      throw ConfigError("objective.objective", "expected logistic or quadratic");
    }
    spec.label_parity = map.get_bool_or("objective.label_parity", false);
    spec.label_threshold = map.get_double_or("objective.label_threshold", 0.5);
  } else {
    spec.samples = map.get_long("objective.samples");
    spec.dim = static_cast<int>(map.get_long("objective.dim"));
    spec.seed = map.get_u64_or("objective.seed", 0);
    spec.noise = map.get_double_or("objective.noise", 0.5);
    spec.feature_scale = map.get_double_or("objective.feature_scale", 1.0);
  }
  return spec;
}

SchemeSpec scheme_from_map(ConfigMap& map) {
  SchemeSpec scheme;
  scheme.kind = SchemeSpec::kind_from_string(map.get_string("scheme.kind"));
  switch (scheme.kind) {
    case SchemeSpec::Kind::stsyn:
      scheme.wait_for = static_cast<int>(map.get_long("scheme.K"));
      scheme.local_updates = static_cast<int>(map.get_long("scheme.U"));
      break;
    case SchemeSpec::Kind::pasgd:
      scheme.local_updates = static_cast<int>(map.get_long("scheme.U"));
      break;
    case SchemeSpec::Kind::fedavg:
      scheme.sample_size = static_cast<int>(map.get_long("scheme.sample_size"));
      scheme.local_updates = static_cast<int>(map.get_long("scheme.U"));
      break;
    case SchemeSpec::Kind::ksync:
      scheme.wait_for = static_cast<int>(map.get_long("scheme.K"));
      break;
    case SchemeSpec::Kind::adacomm:
      scheme.local_updates = static_cast<int>(map.get_long("scheme.U"));
      scheme.decay = map.get_double_or("scheme.gamma", 0.5);
      scheme.interval = map.get_double("scheme.interval");
      break;
    case SchemeSpec::Kind::adasync:
      scheme.wait_for = static_cast<int>(map.get_long("scheme.K"));
      scheme.growth = map.get_double_or("scheme.growth", 2.0);
      scheme.interval = map.get_double("scheme.interval");
      break;
  }
  return scheme;
}

}  // namespace

ExperimentConfig config_from_map(ConfigMap& map) {
  ExperimentConfig cfg;
  cfg.workers = static_cast<int>(map.get_long("run.workers"));
  cfg.rounds = map.get_long("run.rounds");
  cfg.alpha = map.get_double("run.alpha");
  cfg.batch_size = static_cast<int>(map.get_long("run.batch_size"));
  cfg.master_seed = map.get_u64_or("run.master_seed", 1);
  cfg.eval_every = map.get_long_or("run.eval_every", 1);
  cfg.init_scale = map.get_double_or("run.init_scale", 0.0);
  cfg.timing_seed = map.maybe_u64("run.timing_seed");
  cfg.batch_seed = map.maybe_u64("run.batch_seed");
  if (const auto metric = map.maybe_string("run.target_metric")) {
    TargetSpec target;
    if (*metric == "loss") {
      target.metric = TargetSpec::Metric::loss;
    } else if (*metric == "accuracy") {
      target.metric = TargetSpec::Metric::accuracy;
    } else {
      throw ConfigError("run.target_metric", "expected loss or accuracy");
    }
    target.value = map.get_double("run.target_value");
    cfg.target = target;
  } else if (map.contains("run.target_value")) {
    throw ConfigError("run.target_value", "requires run.target_metric");
  }
  cfg.mu = map.get_double("timing.mu");
  cfg.scheme = scheme_from_map(map);
  cfg.dataset = dataset_from_map(map);

  map.require_all_consumed();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  ConfigMap map = ConfigMap::parse_file(path);
  return config_from_map(map);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ConfigMap map = ConfigMap::parse_string(text);
  return config_from_map(map);
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> kv;
  const auto put = [&kv](const std::string& key, const std::string& value) {
    kv.emplace_back(key, value);
  };
  const auto put_num = [&put](const std::string& key, double value) {
    put(key, format_double(value));
  };

  put("run.workers", std::to_string(cfg.workers));
  put("run.rounds", std::to_string(cfg.rounds));
  put_num("run.alpha", cfg.alpha);
  put("run.batch_size", std::to_string(cfg.batch_size));
  put("run.master_seed", std::to_string(cfg.master_seed));
  put("run.eval_every", std::to_string(cfg.eval_every));
  put_num("run.init_scale", cfg.init_scale);
  if (cfg.timing_seed) put("run.timing_seed", std::to_string(*cfg.timing_seed));
  if (cfg.batch_seed) put("run.batch_seed", std::to_string(*cfg.batch_seed));
  if (cfg.target) {
    put("run.target_metric",
        cfg.target->metric == TargetSpec::Metric::loss ? "loss" : "accuracy");
    put_num("run.target_value", cfg.target->value);
  }

  put_num("timing.mu", cfg.mu);

  put("scheme.kind", SchemeSpec::kind_to_string(cfg.scheme.kind));
  switch (cfg.scheme.kind) {
    case SchemeSpec::Kind::stsyn:
      put("scheme.K", std::to_string(cfg.scheme.wait_for));
      put("scheme.U", std::to_string(cfg.scheme.local_updates));
      break;
    case SchemeSpec::Kind::pasgd:
      put("scheme.U", std::to_string(cfg.scheme.local_updates));
      break;
    case SchemeSpec::Kind::fedavg:
      put("scheme.sample_size", std::to_string(cfg.scheme.sample_size));
      put("scheme.U", std::to_string(cfg.scheme.local_updates));
      break;
    case SchemeSpec::Kind::ksync:
      put("scheme.K", std::to_string(cfg.scheme.wait_for));
      break;
    case SchemeSpec::Kind::adacomm:
      put("scheme.U", std::to_string(cfg.scheme.local_updates));
      put_num("scheme.gamma", cfg.scheme.decay);
      put_num("scheme.interval", cfg.scheme.interval);
      break;
    case SchemeSpec::Kind::adasync:
      put("scheme.K", std::to_string(cfg.scheme.wait_for));
      put_num("scheme.growth", cfg.scheme.growth);
      put_num("scheme.interval", cfg.scheme.interval);
      break;
  }

  switch (cfg.dataset.kind) {
    case DatasetSpec::Kind::synthetic_quadratic:
    case DatasetSpec::Kind::synthetic_logistic:
      put("objective.kind", cfg.dataset.kind == DatasetSpec::Kind::synthetic_quadratic
                                ? "synthetic-quadratic"
                                : "synthetic-logistic");
      put("objective.samples", std::to_string(cfg.dataset.samples));
      put("objective.dim", std::to_string(cfg.dataset.dim));
      put("objective.seed", std::to_string(cfg.dataset.seed));
      put_num("objective.noise", cfg.dataset.noise);
      put_num("objective.feature_scale", cfg.dataset.feature_scale);
      break;
    case DatasetSpec::Kind::file:
      put("objective.kind", "file");
      put("objective.path", cfg.dataset.path);
      put("objective.format",
          cfg.dataset.format == DatasetSpec::FileFormat::csv ? "csv" : "idx");
      if (!cfg.dataset.labels_path.empty()) {
        put("objective.labels_path", cfg.dataset.labels_path);
      }
      put("objective.objective",
          cfg.dataset.file_objective == ObjectiveKind::logistic ? "logistic" : "quadratic");
      put("objective.label_parity", cfg.dataset.label_parity ? "true" : "false");
      put_num("objective.label_threshold", cfg.dataset.label_threshold);
      break;
  }

  std::sort(kv.begin(), kv.end());
  std::string out;
  std::string section;
  for (const auto& [key, value] : kv) {
    const std::string sec = key.substr(0, key.find('.'));
    if (sec != section) {
      if (!out.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(key.find('.') + 1) + " = " + value + "\n";
  }
  return out;
}

uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = canonical_config_text(cfg);
  uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  return std::string(buf);
}

}  // namespace stsyn
