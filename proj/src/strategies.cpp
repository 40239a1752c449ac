#include "stsyn/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

namespace stsyn {

SchemeSpec::Kind SchemeSpec::kind_from_string(const std::string& name) {
  if (name == "stsyn") return Kind::stsyn;
  if (name == "pasgd") return Kind::pasgd;
  if (name == "fedavg") return Kind::fedavg;
  if (name == "ksync") return Kind::ksync;
  if (name == "adacomm") return Kind::adacomm;
  if (name == "adasync") return Kind::adasync;
  throw std::invalid_argument("scheme.kind: unknown strategy '" + name + "'");
}

std::string SchemeSpec::kind_to_string(Kind k) {
  switch (k) {
    case Kind::stsyn: return "stsyn";
    case Kind::pasgd: return "pasgd";
    case Kind::fedavg: return "fedavg";
    case Kind::ksync: return "ksync";
    case Kind::adacomm: return "adacomm";
    case Kind::adasync: return "adasync";
  }
  throw std::logic_error("SchemeSpec: bad kind");
}

void SchemeSpec::validate(int workers) const {
  const auto need_wait = [&](const char* who) {
    if (wait_for < 1 || wait_for > workers) {
      throw std::invalid_argument(std::string("scheme.K: ") + who +
                                  " requires 1 <= K <= workers");
    }
  };
  const auto need_updates = [&](const char* who) {
    if (local_updates < 1) {
      throw std::invalid_argument(std::string("scheme.U: ") + who + " requires U >= 1");
    }
  };
  switch (kind) {
    case Kind::stsyn:
      need_wait("stsyn");
      need_updates("stsyn");
      break;
    case Kind::pasgd:
      need_updates("pasgd");
      break;
    case Kind::fedavg:
      need_updates("fedavg");
      if (sample_size < 1 || sample_size > workers) {
        throw std::invalid_argument("scheme.sample_size: fedavg requires 1 <= sample_size <= workers");
      }
      break;
    case Kind::ksync:
      need_wait("ksync");
      break;
    case Kind::adacomm:
      need_updates("adacomm");
      if (!(decay > 0.0)) throw std::invalid_argument("scheme.gamma: adacomm requires gamma > 0");
      if (!(interval > 0.0)) throw std::invalid_argument("scheme.interval: adacomm requires interval > 0");
      break;
    case Kind::adasync:
      need_wait("adasync");
      if (!(growth > 0.0)) throw std::invalid_argument("scheme.growth: adasync requires growth > 0");
      if (!(interval > 0.0)) throw std::invalid_argument("scheme.interval: adasync requires interval > 0");
      break;
  }
}

WorkerClock::WorkerClock(std::function<double()> next_duration)
    : gen_(std::move(next_duration)) {}

WorkerClock WorkerClock::from_cycle(std::vector<double> pattern) {
  if (pattern.empty()) throw std::invalid_argument("WorkerClock: empty duration pattern");
  for (double d : pattern) {
    if (!(d > 0.0)) throw std::invalid_argument("WorkerClock: durations must be positive");
  }
  auto state = std::make_shared<std::pair<std::vector<double>, size_t>>(std::move(pattern), 0);
  return WorkerClock([state]() {
    const double d = state->first[state->second];
    state->second = (state->second + 1) % state->first.size();
    return d;
  });
}

WorkerClock WorkerClock::exponential(uint64_t stream_seed, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("WorkerClock: mu must be > 0");
  auto stream = std::make_shared<RngStream>(stream_seed);
  return WorkerClock([stream, mu]() { return stream->next_exponential(mu); });
}

void WorkerClock::extend_to(int count) {
  while (static_cast<int>(finish_times_.size()) < count) {
    const double prev = finish_times_.empty() ? 0.0 : finish_times_.back();
    finish_times_.push_back(prev + gen_());
  }
}

double WorkerClock::completion_time(int count) {
  if (count < 0) throw std::invalid_argument("WorkerClock: negative update count");
  if (count == 0) return 0.0;
  extend_to(count);
  return finish_times_[count - 1];
}

int WorkerClock::completed_by(double t) {
  if (t < 0.0) return 0;
  while (finish_times_.empty() || finish_times_.back() <= t) {
    extend_to(static_cast<int>(finish_times_.size()) + 1);
  }
  return static_cast<int>(std::upper_bound(finish_times_.begin(), finish_times_.end(), t) -
                          finish_times_.begin());
}

double WorkerClock::duration(int index) {
  if (index < 0) throw std::invalid_argument("WorkerClock: negative duration index");
  extend_to(index + 1);
  return index == 0 ? finish_times_[0] : finish_times_[index] - finish_times_[index - 1];
}

namespace {

// Value of the k-th smallest (value, id) pair; ids break ties.
double kth_smallest(const std::vector<double>& values, int k) {
  std::vector<int> order(values.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                   [&](int a, int b) {
                     return values[a] != values[b] ? values[a] < values[b] : a < b;
                   });
  return values[order[k - 1]];
}

}  // namespace

RoundPlan stsyn_round(std::vector<WorkerClock>& clocks, int wait_for, int local_updates) {
  const int m = static_cast<int>(clocks.size());
  if (m < 1) throw std::invalid_argument("stsyn_round: no workers");
  if (wait_for < 1 || wait_for > m) throw std::invalid_argument("stsyn_round: bad wait_for");
  if (local_updates < 1) throw std::invalid_argument("stsyn_round: bad local_updates");

  std::vector<double> ack_times(m);
  for (int w = 0; w < m; ++w) ack_times[w] = clocks[w].completion_time(local_updates);
  const double cutoff = kth_smallest(ack_times, wait_for);

  RoundPlan plan;
  plan.cutoff = cutoff;
  plan.duration = cutoff;
  plan.updates.resize(m);
  for (int w = 0; w < m; ++w) {
    plan.updates[w] = clocks[w].completed_by(cutoff);
    if (plan.updates[w] >= 1) plan.uploaders.push_back(w);
  }
  plan.comm_cost = m + static_cast<long>(plan.uploaders.size());
  return plan;
}

RoundPlan pasgd_round(std::vector<WorkerClock>& clocks, int local_updates) {
  const int m = static_cast<int>(clocks.size());
  if (m < 1) throw std::invalid_argument("pasgd_round: no workers");
  if (local_updates < 1) throw std::invalid_argument("pasgd_round: bad local_updates");

  RoundPlan plan;
  plan.updates.assign(m, local_updates);
  plan.uploaders.resize(m);
  double slowest = 0.0;
  for (int w = 0; w < m; ++w) {
    plan.uploaders[w] = w;
    slowest = std::max(slowest, clocks[w].completion_time(local_updates));
  }
  plan.duration = slowest;
  plan.cutoff = slowest;
  plan.comm_cost = 2L * m;
  return plan;
}

RoundPlan fedavg_sampled_round(std::vector<WorkerClock>& clocks, int sample_size,
                               int local_updates, RngStream& rng) {
  const int m = static_cast<int>(clocks.size());
  if (m < 1) throw std::invalid_argument("fedavg_sampled_round: no workers");
  if (sample_size < 1 || sample_size > m) {
    throw std::invalid_argument("fedavg_sampled_round: bad sample_size");
  }
  if (local_updates < 1) throw std::invalid_argument("fedavg_sampled_round: bad local_updates");

  // Partial Fisher-Yates, then sort the chosen ids.
  std::vector<int> ids(m);
  for (int i = 0; i < m; ++i) ids[i] = i;
  for (int i = 0; i < sample_size; ++i) {
    const int j = i + static_cast<int>(rng.next_below(static_cast<uint64_t>(m - i)));
    std::swap(ids[i], ids[j]);
  }
  std::vector<int> chosen(ids.begin(), ids.begin() + sample_size);
  std::sort(chosen.begin(), chosen.end());

  RoundPlan plan;
  plan.updates.assign(m, 0);
  double slowest = 0.0;
  for (int w : chosen) {
    plan.updates[w] = local_updates;
    slowest = std::max(slowest, clocks[w].completion_time(local_updates));
  }
  plan.uploaders = std::move(chosen);
  plan.duration = slowest;
  plan.cutoff = slowest;
  plan.comm_cost = 2L * sample_size;
  return plan;
}

RoundPlan ksync_round(std::vector<WorkerClock>& clocks, int wait_for) {
  const int m = static_cast<int>(clocks.size());
  if (m < 1) throw std::invalid_argument("ksync_round: no workers");
  if (wait_for < 1 || wait_for > m) throw std::invalid_argument("ksync_round: bad wait_for");

  std::vector<int> order(m);
  std::vector<double> first(m);
  for (int w = 0; w < m; ++w) {
    order[w] = w;
    first[w] = clocks[w].completion_time(1);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return first[a] != first[b] ? first[a] < first[b] : a < b;
  });

  RoundPlan plan;
  plan.updates.assign(m, 0);
  plan.uploaders.assign(order.begin(), order.begin() + wait_for);
  std::sort(plan.uploaders.begin(), plan.uploaders.end());
  for (int w : plan.uploaders) plan.updates[w] = 1;
  plan.cutoff = first[order[wait_for - 1]];
  plan.duration = plan.cutoff;
  plan.comm_cost = static_cast<long>(m) + wait_for;
  return plan;
}

RoundPlan adacomm_like_round(std::vector<WorkerClock>& clocks, int tau) {
  return pasgd_round(clocks, tau);
}

int adacomm_schedule_next(AdaCommState& state, double round_duration,
                          const AdaCommSchedule& schedule) {
  if (state.tau < 1) throw std::invalid_argument("adacomm_schedule_next: state not initialized");
  state.time_into_interval += round_duration;
  while (schedule.interval > 0.0 && state.time_into_interval >= schedule.interval) {
    state.time_into_interval -= schedule.interval;
    state.tau = std::max(1, static_cast<int>(std::llround(state.tau * schedule.decay)));
  }
  return state.tau;
}

AsyncPipeline async_pipeline_start(std::vector<WorkerClock>& clocks) {
  AsyncPipeline pipe;
  pipe.workers.resize(clocks.size());
  for (size_t w = 0; w < clocks.size(); ++w) {
    pipe.workers[w].busy_until = clocks[w].completion_time(1);
    pipe.workers[w].model_version = 0;
    pipe.workers[w].gradients_started = 1;
  }
  return pipe;
}

AsyncStepOutcome adasync_like_step(AsyncPipeline& pipe, std::vector<WorkerClock>& clocks,
                                   int wait_for) {
  const int m = static_cast<int>(pipe.workers.size());
  if (m < 1) throw std::invalid_argument("adasync_like_step: no workers");
  if (wait_for < 1 || wait_for > m) throw std::invalid_argument("adasync_like_step: bad wait_for");

  std::vector<int> order(m);
  for (int w = 0; w < m; ++w) order[w] = w;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ta = pipe.workers[a].busy_until;
    const double tb = pipe.workers[b].busy_until;
    return ta != tb ? ta < tb : a < b;
  });

  AsyncStepOutcome out;
  const double event_time = pipe.workers[order[wait_for - 1]].busy_until;
  out.elapsed = event_time - pipe.now;
  out.comm_cost = 2L * wait_for;
  out.contributors.assign(order.begin(), order.begin() + wait_for);
  std::sort(out.contributors.begin(), out.contributors.end());
  out.staleness.reserve(wait_for);
  for (int w : out.contributors) {
    out.staleness.push_back(pipe.version - pipe.workers[w].model_version);
  }

  pipe.now = event_time;
  pipe.version += 1;
  for (int w : out.contributors) {
    AsyncWorkerState& st = pipe.workers[w];
    st.model_version = pipe.version;
    st.busy_until = pipe.now + clocks[w].duration(st.gradients_started);
    st.gradients_started += 1;
  }
  return out;
}

int adasync_schedule_next(AdaSyncState& state, double elapsed, int workers,
                          const AdaSyncSchedule& schedule) {
  if (state.wait_for < 1) throw std::invalid_argument("adasync_schedule_next: state not initialized");
  state.time_into_interval += elapsed;
  while (schedule.interval > 0.0 && state.time_into_interval >= schedule.interval) {
    state.time_into_interval -= schedule.interval;
    state.wait_for = std::min(workers, std::max(state.wait_for + 1,
                                                static_cast<int>(std::llround(
                                                    state.wait_for * schedule.growth))));
  }
  return state.wait_for;
}

}  // namespace stsyn
