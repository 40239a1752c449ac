#include "stsyn/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace stsyn {

uint64_t ExperimentConfig::timing_root() const {
  return timing_seed ? *timing_seed : derive_seed(master_seed, Stream::timing);
}

uint64_t ExperimentConfig::batch_root() const {
  return batch_seed ? *batch_seed : derive_seed(master_seed, Stream::batch);
}

void ExperimentConfig::validate() const {
  if (workers < 1) throw std::invalid_argument("run.workers: must be >= 1");
  if (rounds < 1) throw std::invalid_argument("run.rounds: must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("run.alpha: must be > 0");
  if (batch_size < 1) throw std::invalid_argument("run.batch_size: must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("run.eval_every: must be >= 1");
  if (init_scale < 0.0) throw std::invalid_argument("run.init_scale: must be >= 0");
  if (!(mu > 0.0)) throw std::invalid_argument("timing.mu: must be > 0");
  if (target && !std::isfinite(target->value)) {
    throw std::invalid_argument("run.target_value: must be finite");
  }
  scheme.validate(workers);
  dataset.validate();
}

std::string termination_to_string(Termination t) {
  switch (t) {
    case Termination::rounds_exhausted: return "rounds-exhausted";
    case Termination::target_reached: return "target-reached";
    case Termination::numeric_failure: return "numeric-failure";
  }
  throw std::logic_error("bad termination");
}

namespace {

ParamVector initial_model(const ExperimentConfig& cfg, int dim) {
  ParamVector w(dim, 0.0);
  if (cfg.init_scale > 0.0) {
    RngStream rs(derive_seed(cfg.master_seed, Stream::init));
    for (double& x : w) x = cfg.init_scale * rs.next_gaussian();
  }
  return w;
}

void evaluate_into(const Objective& obj, const ParamVector& w, RoundRecord& rec) {
  const auto [loss, grad] = obj.full_loss_and_grad(w);
  rec.loss = loss;
  rec.grad_sq_norm = squared_norm(grad);
  rec.accuracy = obj.accuracy(w);
}

bool record_meets_target(const RoundRecord& rec, const TargetSpec& target) {
  if (target.metric == TargetSpec::Metric::loss) {
    return rec.loss && *rec.loss <= target.value;
  }
  return rec.accuracy && *rec.accuracy >= target.value;
}

ParamVector run_local_chain(const ExperimentConfig& cfg, const Objective& obj,
                            const std::vector<long>& shard, const ParamVector& start,
                            int updates, int worker, long round, uint64_t replicate) {
  const uint64_t root = cfg.batch_root();
  ParamVector w = start;
  for (int u = 0; u < updates; ++u) {
    RngStream bs(replicate == 0
                     ? derive_seed(root, Stream::batch, worker, round, u)
                     : derive_seed(root, Stream::batch_replicate, replicate, worker, round, u));
    const MiniBatch batch =
        draw_minibatch(shard, cfg.batch_size, worker, round, u, bs);
    w = local_update(obj, w, batch, cfg.alpha);
  }
  return w;
}

RoundPlan plan_round(const ExperimentConfig& cfg, std::vector<WorkerClock>& clocks,
                     long round, AdaCommState& adacomm_state) {
  switch (cfg.scheme.kind) {
    case SchemeSpec::Kind::stsyn:
      return stsyn_round(clocks, cfg.scheme.wait_for, cfg.scheme.local_updates);
    case SchemeSpec::Kind::pasgd:
      return pasgd_round(clocks, cfg.scheme.local_updates);
    case SchemeSpec::Kind::fedavg: {
      RngStream rng(derive_seed(cfg.master_seed, Stream::sampling, round));
      return fedavg_sampled_round(clocks, cfg.scheme.sample_size,
                                  cfg.scheme.local_updates, rng);
    }
    case SchemeSpec::Kind::ksync:
      return ksync_round(clocks, cfg.scheme.wait_for);
    case SchemeSpec::Kind::adacomm:
      return adacomm_like_round(clocks, adacomm_state.tau);
    case SchemeSpec::Kind::adasync:
      break;
  }
  throw std::logic_error("plan_round: async scheme has no per-round plan");
}

Trace run_sync_experiment(const ExperimentConfig& cfg, const Objective& obj,
                          const std::vector<std::vector<long>>& shards,
                          std::vector<ParamVector>* iterates) {
  Trace trace;
  trace.config = cfg;
  trace.termination = Termination::rounds_exhausted;

  ParamVector w = initial_model(cfg, obj.dim());
  AdaCommState adacomm_state{cfg.scheme.local_updates, 0.0};
  const AdaCommSchedule adacomm_schedule{cfg.scheme.local_updates, cfg.scheme.decay,
                                         cfg.scheme.interval};
  const uint64_t timing_root = cfg.timing_root();
  double cum_time = 0.0;
  long cum_comm = 0;

  for (long j = 0; j < cfg.rounds; ++j) {
    if (iterates) iterates->push_back(w);

    std::vector<WorkerClock> clocks;
    clocks.reserve(cfg.workers);
    for (int m = 0; m < cfg.workers; ++m) {
      clocks.push_back(WorkerClock::exponential(
          derive_seed(timing_root, Stream::timing, m, j), cfg.mu));
    }
    const RoundPlan plan = plan_round(cfg, clocks, j, adacomm_state);

    RoundRecord rec;
    rec.round = j;
    rec.round_time = plan.duration;
    rec.comm = plan.comm_cost;
    cum_time += plan.duration;
    cum_comm += plan.comm_cost;
    rec.cum_time = cum_time;
    rec.cum_comm = cum_comm;
    rec.uploader_count = static_cast<int>(plan.uploaders.size());
    rec.updates = plan.updates;

    bool failed = false;
    try {
      if (j % cfg.eval_every == 0) evaluate_into(obj, w, rec);
      std::vector<ParamVector> uploads;
      uploads.reserve(plan.uploaders.size());
      for (int m : plan.uploaders) {
        uploads.push_back(
            run_local_chain(cfg, obj, shards[m], w, plan.updates[m], m, j, 0));
      }
      ParamVector next = aggregate(uploads);
      if (!all_finite(next)) throw NumericFailure("aggregate: non-finite global model");
      trace.records.push_back(rec);
      w = std::move(next);
    } catch (const NumericFailure&) {
      trace.records.push_back(rec);
      failed = true;
    }
    if (failed) {
      trace.termination = Termination::numeric_failure;
      break;
    }
    if (cfg.target && record_meets_target(rec, *cfg.target)) {
      trace.termination = Termination::target_reached;
      break;
    }
    if (cfg.scheme.kind == SchemeSpec::Kind::adacomm) {
      adacomm_schedule_next(adacomm_state, plan.duration, adacomm_schedule);
    }
  }

  trace.final_model = std::move(w);
  return trace;
}

Trace run_async_experiment(const ExperimentConfig& cfg, const Objective& obj,
                           const std::vector<std::vector<long>>& shards,
                           std::vector<ParamVector>* iterates) {
  Trace trace;
  trace.config = cfg;
  trace.termination = Termination::rounds_exhausted;

  const uint64_t timing_root = cfg.timing_root();
  std::vector<WorkerClock> clocks;
  clocks.reserve(cfg.workers);
  for (int m = 0; m < cfg.workers; ++m) {
    clocks.push_back(
        WorkerClock::exponential(derive_seed(timing_root, Stream::timing, m), cfg.mu));
  }
  AsyncPipeline pipe = async_pipeline_start(clocks);
  AdaSyncState sched_state{cfg.scheme.wait_for, 0.0};
  const AdaSyncSchedule schedule{cfg.scheme.wait_for, cfg.scheme.growth,
                                 cfg.scheme.interval};

  ParamVector w = initial_model(cfg, obj.dim());
  // Workers compute against the version they last received.
  std::map<uint64_t, ParamVector> versions;
  versions[0] = w;

  double cum_time = 0.0;
  long cum_comm = 0;

  for (long j = 0; j < cfg.rounds; ++j) {
    if (iterates) iterates->push_back(w);
    const int wait_for = sched_state.wait_for;
    const AsyncStepOutcome step = adasync_like_step(pipe, clocks, wait_for);

    RoundRecord rec;
    rec.round = j;
    rec.round_time = step.elapsed;
    rec.comm = step.comm_cost;
    cum_time += step.elapsed;
    cum_comm += step.comm_cost;
    rec.cum_time = cum_time;
    rec.cum_comm = cum_comm;
    rec.uploader_count = static_cast<int>(step.contributors.size());
    rec.updates.assign(cfg.workers, 0);
    double staleness_sum = 0.0;
    for (size_t i = 0; i < step.contributors.size(); ++i) {
      rec.updates[step.contributors[i]] = 1;
      staleness_sum += static_cast<double>(step.staleness[i]);
    }
    rec.mean_staleness = staleness_sum / static_cast<double>(step.contributors.size());

    bool failed = false;
    try {
      if (j % cfg.eval_every == 0) evaluate_into(obj, w, rec);
      // Average the arriving gradients, each taken at the version its worker
      // started from; staleness is applied without compensation. The pipeline
      // already restarted contributors, so the gradient that just completed
      // is index gradients_started - 2.
      ParamVector combined(obj.dim(), 0.0);
      const double weight = 1.0 / static_cast<double>(step.contributors.size());
      for (size_t i = 0; i < step.contributors.size(); ++i) {
        const int m = step.contributors[i];
        const uint64_t based_version = (pipe.version - 1) - step.staleness[i];
        const int grad_index = pipe.workers[m].gradients_started - 2;
        const auto it = versions.find(based_version);
        if (it == versions.end()) {
          throw std::logic_error("adasync: missing model version");
        }
        RngStream bs(derive_seed(cfg.batch_root(), Stream::batch, m, grad_index, 0));
        const MiniBatch batch =
            draw_minibatch(shards[m], cfg.batch_size, m, grad_index, 0, bs);
        const ParamVector g = minibatch_gradient(obj, it->second, batch);
        for (int c = 0; c < obj.dim(); ++c) combined[c] += weight * g[c];
      }
      ParamVector next = w;
      for (int c = 0; c < obj.dim(); ++c) next[c] -= cfg.alpha * combined[c];
      if (!all_finite(next)) throw NumericFailure("adasync: non-finite global model");
      trace.records.push_back(rec);
      w = std::move(next);
      versions[pipe.version] = w;
      // Drop versions no worker references any more.
      uint64_t min_version = pipe.version;
      for (const auto& st : pipe.workers) min_version = std::min(min_version, st.model_version);
      versions.erase(versions.begin(), versions.lower_bound(min_version));
    } catch (const NumericFailure&) {
      trace.records.push_back(rec);
      failed = true;
    }
    if (failed) {
      trace.termination = Termination::numeric_failure;
      break;
    }
    if (cfg.target && record_meets_target(rec, *cfg.target)) {
      trace.termination = Termination::target_reached;
      break;
    }
    adasync_schedule_next(sched_state, step.elapsed, cfg.workers, schedule);
  }

  trace.final_model = std::move(w);
  return trace;
}

}  // namespace

Trace run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  auto data = build_dataset(cfg.dataset);
  const Objective obj(cfg.dataset.objective_kind(), data);
  const auto shards = partition_iid(data->size(), cfg.workers, cfg.master_seed);
  return run_experiment(cfg, obj, shards);
}

Trace run_experiment(const ExperimentConfig& cfg, const Objective& obj,
                     const std::vector<std::vector<long>>& shards,
                     std::vector<ParamVector>* iterates) {
  cfg.validate();
  if (static_cast<int>(shards.size()) != cfg.workers) {
    throw std::invalid_argument("run_experiment: shard count != workers");
  }
  if (cfg.scheme.kind == SchemeSpec::Kind::adasync) {
    return run_async_experiment(cfg, obj, shards, iterates);
  }
  return run_sync_experiment(cfg, obj, shards, iterates);
}

ParamVector replay_round(const ExperimentConfig& cfg, const Objective& obj,
                         const std::vector<std::vector<long>>& shards,
                         const ParamVector& w, const RoundRecord& rec,
                         uint64_t replicate) {
  std::vector<ParamVector> uploads;
  for (int m = 0; m < cfg.workers; ++m) {
    if (rec.updates[m] >= 1) {
      uploads.push_back(
          run_local_chain(cfg, obj, shards[m], w, rec.updates[m], m, rec.round, replicate));
    }
  }
  return aggregate(uploads);
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "K") return SweepAxis::wait_for;
  if (name == "U") return SweepAxis::local_updates;
  if (name == "scheme") return SweepAxis::scheme;
  throw std::invalid_argument("sweep axis must be one of K, U, scheme");
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, SweepAxis axis,
                                  const std::vector<std::string>& values) {
  base.validate();
  auto data = build_dataset(base.dataset);
  const Objective obj(base.dataset.objective_kind(), data);
  const auto shards = partition_iid(data->size(), base.workers, base.master_seed);

  std::vector<SweepPoint> points;
  points.reserve(values.size());
  for (const std::string& v : values) {
    SweepPoint point;
    point.value = v;
    try {
      ExperimentConfig cfg = base;
      switch (axis) {
        case SweepAxis::wait_for:
          cfg.scheme.wait_for = std::stoi(v);
          break;
        case SweepAxis::local_updates:
          cfg.scheme.local_updates = std::stoi(v);
          break;
        case SweepAxis::scheme:
          cfg.scheme.kind = SchemeSpec::kind_from_string(v);
          break;
      }
      cfg.validate();
      point.trace = run_experiment(cfg, obj, shards);
    } catch (const std::exception& e) {
      point.error = e.what();
    }
    points.push_back(std::move(point));
  }
  return points;
}

namespace {

const RoundRecord* first_record_meeting(const Trace& trace, const TargetSpec& target) {
  for (const RoundRecord& rec : trace.records) {
    if (record_meets_target(rec, target)) return &rec;
  }
  return nullptr;
}

}  // namespace

std::optional<double> time_to_target(const Trace& trace, const TargetSpec& target) {
  const RoundRecord* rec = first_record_meeting(trace, target);
  if (!rec) return std::nullopt;
  return rec->cum_time;
}

std::optional<long> comm_to_target(const Trace& trace, const TargetSpec& target) {
  const RoundRecord* rec = first_record_meeting(trace, target);
  if (!rec) return std::nullopt;
  return rec->cum_comm;
}

}  // namespace stsyn
