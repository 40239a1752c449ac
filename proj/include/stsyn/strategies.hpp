#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stsyn/rng.hpp"

namespace stsyn {

// Synchronization strategy and its hyper-parameters. Exactly the fields that
// apply to `kind` are validated; config strings are the enum names below.
struct SchemeSpec {
  enum class Kind { stsyn, pasgd, fedavg, ksync, adacomm, adasync };

  Kind kind = Kind::stsyn;
  int wait_for = 0;       // K: stsyn, ksync; initial K for adasync
  int local_updates = 0;  // U: stsyn, pasgd, fedavg; initial tau for adacomm
  int sample_size = 0;    // fedavg
  double decay = 0.5;     // adacomm: tau multiplier per interval
  double growth = 2.0;    // adasync: K multiplier per interval
  double interval = 0.0;  // adacomm/adasync: simulated seconds per adaptation step

  static Kind kind_from_string(const std::string& name);
  static std::string kind_to_string(Kind k);
  void validate(int workers) const;  // throws std::invalid_argument naming the field
};

// Outcome of one synchronization round: who computed how much, who uploads,
// how long the round took, and what it cost on the wire.
struct RoundPlan {
  std::vector<int> updates;    // completed updates per worker
  std::vector<int> uploaders;  // sorted worker ids
  double duration = 0.0;       // round wall-clock
  long comm_cost = 0;          // downloads + uploads
  double cutoff = 0.0;         // computation stop time
};

// Per-round compute timeline of one worker. Durations are produced lazily
// from the supplied generator, so a fast worker can be queried for any number
// of updates without a fixed horizon.
class WorkerClock {
 public:
  explicit WorkerClock(std::function<double()> next_duration);
  static WorkerClock from_cycle(std::vector<double> pattern);
  static WorkerClock exponential(uint64_t stream_seed, double mu);

  // Time at which update `count` (1-based) finishes; count 0 is time 0.
  double completion_time(int count);
  // Updates fully finished by time t; one in progress at t does not count.
  int completed_by(double t);
  // Duration of the (index+1)-th update.
  double duration(int index);

 private:
  void extend_to(int count);
  std::function<double()> gen_;
  std::vector<double> finish_times_;  // finish_times_[i] = completion of update i+1
};

// Wait for the K-th worker to finish U updates; everyone computes until that
// cutoff, in-progress updates are cancelled, and any worker with >= 1
// completed update uploads. Comm cost: M downloads + |uploaders| uploads.
RoundPlan stsyn_round(std::vector<WorkerClock>& clocks, int wait_for, int local_updates);

// All workers perform exactly U updates and upload; round time is the
// slowest worker's completion. Comm cost 2M.
RoundPlan pasgd_round(std::vector<WorkerClock>& clocks, int local_updates);

// Uniformly sampled subset performs exactly U updates; cost 2*sample_size.
RoundPlan fedavg_sampled_round(std::vector<WorkerClock>& clocks, int sample_size,
                               int local_updates, RngStream& rng);

// Single update per worker, K earliest finishers upload, rest are cancelled.
// Comm cost M + K.
RoundPlan ksync_round(std::vector<WorkerClock>& clocks, int wait_for);

// PASGD round with the current adaptive update count tau.
RoundPlan adacomm_like_round(std::vector<WorkerClock>& clocks, int tau);

struct AdaCommSchedule {
  int initial_tau = 20;
  double decay = 0.5;
  double interval = 0.0;  // simulated seconds between decay steps
};

struct AdaCommState {
  int tau = 0;
  double time_into_interval = 0.0;
};

// Advance the tau schedule by one finished round; returns tau for the next
// round (decays at interval boundaries, floor 1).
int adacomm_schedule_next(AdaCommState& state, double round_duration,
                          const AdaCommSchedule& schedule);

// ---- K-async pipeline ----------------------------------------------------

struct AsyncWorkerState {
  double busy_until = 0.0;      // completion time of the gradient in flight
  uint64_t model_version = 0;   // version the in-flight gradient is based on
  int gradients_started = 1;
};

struct AsyncPipeline {
  double now = 0.0;
  uint64_t version = 0;  // global model version
  std::vector<AsyncWorkerState> workers;
};

struct AsyncStepOutcome {
  std::vector<int> contributors;      // sorted worker ids
  std::vector<uint64_t> staleness;    // per contributor: versions behind
  double elapsed = 0.0;               // time since the previous global update
  long comm_cost = 0;                 // 2 * wait_for
};

// Start all workers computing their first gradient.
AsyncPipeline async_pipeline_start(std::vector<WorkerClock>& clocks);

// One global update of K-async SGD: the wait_for earliest in-flight
// gradients are applied (stale ones unmodified), their workers restart on
// the new version, everyone else keeps computing.
AsyncStepOutcome adasync_like_step(AsyncPipeline& pipe, std::vector<WorkerClock>& clocks,
                                   int wait_for);

struct AdaSyncSchedule {
  int initial_wait = 10;
  double growth = 2.0;
  double interval = 0.0;
};

struct AdaSyncState {
  int wait_for = 0;
  double time_into_interval = 0.0;
};

// Advance the K schedule by one global update; grows at interval boundaries,
// capped at the worker count.
int adasync_schedule_next(AdaSyncState& state, double elapsed, int workers,
                          const AdaSyncSchedule& schedule);

}  // namespace stsyn
