#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "stsyn/simulator.hpp"

namespace stsyn {

inline constexpr const char* kVersionString = "0.1.0";

struct RunManifest {
  std::string config_hash;
  uint64_t master_seed = 0;
  std::string version;
  std::string started_at;
  std::string finished_at;
  long rounds = 0;
  std::string termination;
  std::vector<std::string> files;
};

// Writes rounds.jsonl (one fixed-key-order object per round), summary.csv,
// config.cfg (canonical form) and manifest.json into `dir`. Returns the
// manifest. Everything except the two timestamps is reproducible
// byte-for-byte from the config.
RunManifest persist_trace(const Trace& trace, const std::filesystem::path& dir,
                          const std::string& started_at = "");

// Reads rounds.jsonl back; config.cfg is read via load_config separately.
std::vector<RoundRecord> load_trace_records(const std::filesystem::path& dir);

enum class PlotMetric { time, comm };

// Accuracy-if-present-else-loss against the chosen cumulative metric, one
// x/y column pair per trace, rows padded to the longest trace.
void emit_plot_data(const std::vector<const Trace*>& traces,
                    const std::vector<std::string>& labels, PlotMetric metric,
                    std::ostream& out);

std::string iso_timestamp_now();

}  // namespace stsyn
