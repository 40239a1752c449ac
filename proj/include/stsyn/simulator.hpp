#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stsyn/dataset.hpp"
#include "stsyn/sgd.hpp"
#include "stsyn/strategies.hpp"

namespace stsyn {

struct TargetSpec {
  enum class Metric { loss, accuracy };
  Metric metric = Metric::loss;
  double value = 0.0;
};

struct ExperimentConfig {
  int workers = 0;
  SchemeSpec scheme;
  DatasetSpec dataset;
  double alpha = 0.0;
  int batch_size = 0;
  double mu = 0.0;  // mean per-update compute time
  long rounds = 0;
  std::optional<TargetSpec> target;
  uint64_t master_seed = 0;
  long eval_every = 1;
  double init_scale = 0.0;  // 0 starts from the origin
  // Purpose roots normally derive from the master seed; overriding one lets
  // timing and learning randomness vary independently.
  std::optional<uint64_t> timing_seed;
  std::optional<uint64_t> batch_seed;

  uint64_t timing_root() const;
  uint64_t batch_root() const;
  void validate() const;  // throws std::invalid_argument naming the field
};

struct RoundRecord {
  long round = 0;
  double round_time = 0.0;
  double cum_time = 0.0;
  long comm = 0;
  long cum_comm = 0;
  int uploader_count = 0;
  std::vector<int> updates;  // per worker
  // Metrics of the model the round started from; absent off the eval cadence.
  std::optional<double> loss;
  std::optional<double> grad_sq_norm;
  std::optional<double> accuracy;
  std::optional<double> mean_staleness;  // adasync only
};

enum class Termination { rounds_exhausted, target_reached, numeric_failure };

std::string termination_to_string(Termination t);

struct Trace {
  ExperimentConfig config;
  std::vector<RoundRecord> records;
  ParamVector final_model;
  Termination termination = Termination::rounds_exhausted;
};

// Runs the configured number of rounds (or stops at the target / on numeric
// failure). Deterministic: equal configs produce equal traces.
Trace run_experiment(const ExperimentConfig& cfg);

// Same, with a pre-built objective and partition (shared across sweep points);
// optionally captures the global iterate at the start of every round.
Trace run_experiment(const ExperimentConfig& cfg, const Objective& obj,
                     const std::vector<std::vector<long>>& shards,
                     std::vector<ParamVector>* iterates = nullptr);

// Re-executes the local chains of one recorded round starting from `w`,
// following the recorded plan but with batch streams salted by `replicate`
// (replicate 0 reproduces the original round).
ParamVector replay_round(const ExperimentConfig& cfg, const Objective& obj,
                         const std::vector<std::vector<long>>& shards,
                         const ParamVector& w, const RoundRecord& rec,
                         uint64_t replicate);

enum class SweepAxis { wait_for, local_updates, scheme };

SweepAxis sweep_axis_from_string(const std::string& name);

struct SweepPoint {
  std::string value;
  std::optional<Trace> trace;
  std::string error;  // set when this point failed
};

// One run per value with all randomness shared across points, so comparisons
// isolate the swept hyper-parameter.
std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, SweepAxis axis,
                                  const std::vector<std::string>& values);

// Cumulative wall-clock / communication at the first record meeting the
// target; nullopt when the trace never does.
std::optional<double> time_to_target(const Trace& trace, const TargetSpec& target);
std::optional<long> comm_to_target(const Trace& trace, const TargetSpec& target);

}  // namespace stsyn
