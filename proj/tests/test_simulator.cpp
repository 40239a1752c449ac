#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stsyn/simulator.hpp"
#include "test_util.hpp"

using namespace stsyn;

namespace {

ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.workers = 4;
  cfg.scheme.kind = SchemeSpec::Kind::stsyn;
  cfg.scheme.wait_for = 3;
  cfg.scheme.local_updates = 2;
  cfg.dataset.kind = DatasetSpec::Kind::synthetic_quadratic;
  cfg.dataset.samples = 200;
  cfg.dataset.dim = 5;
  cfg.dataset.seed = 9;
  cfg.dataset.noise = 0.5;
  cfg.alpha = 0.05;
  cfg.batch_size = 10;
  cfg.mu = 1e-4;
  cfg.rounds = 20;
  cfg.master_seed = 4242;
  return cfg;
}

bool records_equal(const RoundRecord& a, const RoundRecord& b) {
  return a.round == b.round && a.round_time == b.round_time && a.cum_time == b.cum_time &&
         a.comm == b.comm && a.cum_comm == b.cum_comm &&
         a.uploader_count == b.uploader_count && a.updates == b.updates &&
         a.loss == b.loss && a.grad_sq_norm == b.grad_sq_norm &&
         a.accuracy == b.accuracy && a.mean_staleness == b.mean_staleness;
}

}  // namespace

TEST_CASE("identical configs give identical traces") {
  const ExperimentConfig cfg = base_config();
  const Trace a = run_experiment(cfg);
  const Trace b = run_experiment(cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(records_equal(a.records[i], b.records[i]));
  }
  CHECK(a.final_model == b.final_model);
  CHECK(a.termination == b.termination);
}

TEST_CASE("single-worker run is plain serial SGD") {
  ExperimentConfig cfg = base_config();
  cfg.workers = 1;
  cfg.scheme.wait_for = 1;
  cfg.scheme.local_updates = 1;
  cfg.rounds = 50;
  const Trace trace = run_experiment(cfg);

  // Re-derive the iterate sequence with bare sgd-core calls.
  auto data = build_dataset(cfg.dataset);
  const Objective obj(cfg.dataset.objective_kind(), data);
  const auto shards = partition_iid(data->size(), 1, cfg.master_seed);
  ParamVector w(obj.dim(), 0.0);
  const uint64_t batch_root = cfg.batch_root();
  for (long j = 0; j < 50; ++j) {
    RngStream bs(derive_seed(batch_root, Stream::batch, 0, j, 0));
    const MiniBatch batch = draw_minibatch(shards[0], cfg.batch_size, 0, j, 0, bs);
    w = local_update(obj, w, batch, cfg.alpha);
  }
  REQUIRE(trace.records.size() == 50);
  CHECK(trace.final_model == w);
}

TEST_CASE("batch randomness does not touch timing") {
  ExperimentConfig cfg = base_config();
  const Trace a = run_experiment(cfg);
  cfg.batch_seed = 777777;
  const Trace b = run_experiment(cfg);
  REQUIRE(a.records.size() == b.records.size());
  bool losses_differ = false;
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].round_time == b.records[i].round_time);
    CHECK(a.records[i].comm == b.records[i].comm);
    CHECK(a.records[i].updates == b.records[i].updates);
    CHECK(a.records[i].uploader_count == b.records[i].uploader_count);
    if (a.records[i].loss != b.records[i].loss) losses_differ = true;
  }
  CHECK(losses_differ);
}

TEST_CASE("timing randomness does not touch batch draws") {
  ExperimentConfig cfg = base_config();
  const ExperimentConfig cfg2 = [&] {
    ExperimentConfig c = cfg;
    c.timing_seed = 555;
    return c;
  }();
  // Batch indices are keyed by (worker, round, step) alone.
  auto data = build_dataset(cfg.dataset);
  const auto shards = partition_iid(data->size(), cfg.workers, cfg.master_seed);
  for (int m = 0; m < cfg.workers; ++m) {
    for (long j = 0; j < 3; ++j) {
      for (int u = 0; u < 2; ++u) {
        RngStream s1(derive_seed(cfg.batch_root(), Stream::batch, m, j, u));
        RngStream s2(derive_seed(cfg2.batch_root(), Stream::batch, m, j, u));
        const MiniBatch b1 = draw_minibatch(shards[m], cfg.batch_size, m, j, u, s1);
        const MiniBatch b2 = draw_minibatch(shards[m], cfg.batch_size, m, j, u, s2);
        CHECK(b1.indices == b2.indices);
      }
    }
  }
  // Both runs start from the same model, so round 0 evaluates identically
  // even though the plans diverge afterwards.
  const Trace a = run_experiment(cfg);
  const Trace b = run_experiment(cfg2);
  CHECK(a.records[0].loss == b.records[0].loss);
  bool plans_differ = false;
  for (size_t i = 0; i < std::min(a.records.size(), b.records.size()); ++i) {
    if (a.records[i].updates != b.records[i].updates) plans_differ = true;
  }
  CHECK(plans_differ);
}

TEST_CASE("stsyn cumulative time never exceeds pasgd under shared clocks") {
  ExperimentConfig fast = base_config();
  fast.workers = 8;
  fast.scheme.wait_for = 5;
  fast.scheme.local_updates = 3;
  fast.rounds = 40;
  ExperimentConfig slow = fast;
  slow.scheme.kind = SchemeSpec::Kind::pasgd;
  slow.scheme.local_updates = 3;

  const Trace a = run_experiment(fast);
  const Trace b = run_experiment(slow);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].cum_time <= b.records[i].cum_time);
  }
}

TEST_CASE("metric accounting for stsyn") {
  const Trace trace = run_experiment(base_config());
  double time_sum = 0.0;
  long comm_sum = 0;
  for (const auto& rec : trace.records) {
    CHECK(rec.comm == 4 + rec.uploader_count);
    time_sum += rec.round_time;
    comm_sum += rec.comm;
    CHECK(rec.cum_time == doctest::Approx(time_sum).epsilon(1e-15));
    CHECK(rec.cum_comm == comm_sum);
  }
}

TEST_CASE("loss shrinks on a gentle quadratic for every replicate") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    ExperimentConfig cfg = base_config();
    cfg.master_seed = seed;
    cfg.rounds = 30;
    const Objective obj(ObjectiveKind::quadratic, build_dataset(cfg.dataset));
    REQUIRE(cfg.alpha < 1.0 / obj.smoothness());
    const Trace trace = run_experiment(cfg);
    const double initial = *trace.records.front().loss;
    const double final_loss = obj.full_loss(trace.final_model);
    CHECK(final_loss < initial);
  }
}

TEST_CASE("target lookup on a hand-built trace") {
  Trace trace;
  for (long j = 0; j < 3; ++j) {
    RoundRecord rec;
    rec.round = j;
    rec.round_time = 1.0 + j;
    rec.cum_time = (j + 1) * (j + 2) / 2.0;
    rec.comm = 10;
    rec.cum_comm = 10 * (j + 1);
    rec.loss = 1.0 - 0.3 * j;  // 1.0, 0.7, 0.4
    trace.records.push_back(rec);
  }

  const TargetSpec above_initial{TargetSpec::Metric::loss, 2.0};
  CHECK(*time_to_target(trace, above_initial) == 1.0);  // round 0 cumulative
  CHECK(*comm_to_target(trace, above_initial) == 10);

  const TargetSpec crossing{TargetSpec::Metric::loss, 0.7};
  CHECK(*time_to_target(trace, crossing) == 3.0);  // met at round 1
  CHECK(*comm_to_target(trace, crossing) == 20);

  const TargetSpec unreachable{TargetSpec::Metric::loss, 0.1};
  CHECK(!time_to_target(trace, unreachable).has_value());
  CHECK(!comm_to_target(trace, unreachable).has_value());
}

TEST_CASE("target termination stops the run") {
  ExperimentConfig cfg = base_config();
  cfg.rounds = 500;
  cfg.target = TargetSpec{TargetSpec::Metric::loss, 1e9};  // met immediately
  const Trace trace = run_experiment(cfg);
  CHECK(trace.records.size() == 1);
  CHECK(trace.termination == Termination::target_reached);
}

TEST_CASE("a single-point sweep equals the direct run") {
  ExperimentConfig cfg = base_config();
  const auto points = run_sweep(cfg, SweepAxis::wait_for, {"3"});
  REQUIRE(points.size() == 1);
  REQUIRE(points[0].trace.has_value());
  const Trace direct = run_experiment(cfg);
  REQUIRE(points[0].trace->records.size() == direct.records.size());
  for (size_t i = 0; i < direct.records.size(); ++i) {
    CHECK(records_equal(points[0].trace->records[i], direct.records[i]));
  }
  CHECK(points[0].trace->final_model == direct.final_model);
}

TEST_CASE("sweep points share timing randomness") {
  ExperimentConfig cfg = base_config();
  cfg.workers = 6;
  cfg.scheme.wait_for = 3;
  const auto points = run_sweep(cfg, SweepAxis::wait_for, {"1", "6"});
  REQUIRE(points.size() == 2);
  // K=6 waits for everyone, so its round must be at least as long, round by
  // round, because the clocks are identical.
  const auto& a = points[0].trace->records;
  const auto& b = points[1].trace->records;
  for (size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    CHECK(a[i].round_time <= b[i].round_time);
  }
}

TEST_CASE("a bad sweep value fails that point only") {
  ExperimentConfig cfg = base_config();
  const auto points = run_sweep(cfg, SweepAxis::wait_for, {"3", "99"});
  REQUIRE(points.size() == 2);
  CHECK(points[0].trace.has_value());
  CHECK(!points[1].trace.has_value());
  CHECK(!points[1].error.empty());
}

TEST_CASE("runaway stepsize ends in a flagged partial trace") {
  ExperimentConfig cfg = base_config();
  cfg.alpha = 1e6;
  cfg.rounds = 200;
  const Trace trace = run_experiment(cfg);
  CHECK(trace.termination == Termination::numeric_failure);
  CHECK(trace.records.size() < 200);
  CHECK(!trace.records.empty());
  CHECK(all_finite(trace.final_model));
}

TEST_CASE("adasync produces staleness-annotated pseudo-rounds") {
  ExperimentConfig cfg = base_config();
  cfg.workers = 6;
  cfg.scheme.kind = SchemeSpec::Kind::adasync;
  cfg.scheme.wait_for = 2;
  cfg.scheme.growth = 2.0;
  cfg.scheme.interval = 1.0;
  cfg.rounds = 40;
  const Trace trace = run_experiment(cfg);
  REQUIRE(trace.records.size() == 40);
  for (const auto& rec : trace.records) {
    CHECK(rec.mean_staleness.has_value());
    CHECK(rec.comm == 2 * rec.uploader_count);
    CHECK(rec.round_time >= 0.0);
  }
  // K grows over time, so later pseudo-rounds involve more uploaders.
  CHECK(trace.records.back().uploader_count >= trace.records.front().uploader_count);
  CHECK(all_finite(trace.final_model));
}

TEST_CASE("fedavg sampling all workers reproduces pasgd exactly") {
  ExperimentConfig fed = base_config();
  fed.scheme.kind = SchemeSpec::Kind::fedavg;
  fed.scheme.sample_size = fed.workers;
  fed.scheme.local_updates = 2;
  ExperimentConfig pas = base_config();
  pas.scheme.kind = SchemeSpec::Kind::pasgd;
  pas.scheme.local_updates = 2;

  const Trace a = run_experiment(fed);
  const Trace b = run_experiment(pas);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) CHECK(records_equal(a.records[i], b.records[i]));
  CHECK(a.final_model == b.final_model);
}

TEST_CASE("adacomm with unit decay reproduces pasgd exactly") {
  ExperimentConfig ada = base_config();
  ada.scheme.kind = SchemeSpec::Kind::adacomm;
  ada.scheme.local_updates = 2;
  ada.scheme.decay = 1.0;
  ada.scheme.interval = 1e-9;
  ExperimentConfig pas = base_config();
  pas.scheme.kind = SchemeSpec::Kind::pasgd;
  pas.scheme.local_updates = 2;

  const Trace a = run_experiment(ada);
  const Trace b = run_experiment(pas);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) CHECK(records_equal(a.records[i], b.records[i]));
  CHECK(a.final_model == b.final_model);
}

TEST_CASE("config validation names the failing key") {
  ExperimentConfig cfg = base_config();
  cfg.workers = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("run.workers"),
                       std::invalid_argument);
  cfg = base_config();
  cfg.mu = 0.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("timing.mu"),
                       std::invalid_argument);
  cfg = base_config();
  cfg.scheme.wait_for = 14;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
