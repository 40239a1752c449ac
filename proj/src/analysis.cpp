#include "stsyn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stsyn {

StepsizeConditionReport check_stepsize_conditions(double smoothness, double alpha,
                                                double max_updates, double delta) {
  if (!(smoothness > 0.0) || !(alpha > 0.0) || !(max_updates >= 1.0)) {
    throw std::invalid_argument("check_stepsize_conditions: L, alpha, U0 must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("check_stepsize_conditions: delta must lie in (0,1)");
  }
  const double la = smoothness * alpha;
  StepsizeConditionReport rep;
  rep.cond1_value =
      0.5 * la * la * (max_updates + 1.0) * (max_updates - 2.0) + la * max_updates;
  rep.cond1_slack = 1.0 - rep.cond1_value;
  rep.cond2_slack = (1.0 - delta) - la * la;
  rep.pass = rep.cond1_slack >= 0.0 && rep.cond2_slack >= 0.0;
  return rep;
}

void ConvergenceInputs::validate() const {
  if (!(smoothness > 0.0)) throw std::invalid_argument("ConvergenceInputs: smoothness must be > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("ConvergenceInputs: alpha must be > 0");
  if (variance_bound < 0.0) throw std::invalid_argument("ConvergenceInputs: variance_bound must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("ConvergenceInputs: batch_size must be >= 1");
  if (!(max_updates >= 1.0)) throw std::invalid_argument("ConvergenceInputs: max_updates must be >= 1");
  if (!(avg_updates > 0.0) || avg_updates > max_updates) {
    throw std::invalid_argument("ConvergenceInputs: need 0 < avg_updates <= max_updates");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("ConvergenceInputs: delta must lie in (0,1)");
  if (wait_for < 1) throw std::invalid_argument("ConvergenceInputs: wait_for must be >= 1");
  if (rounds < 1) throw std::invalid_argument("ConvergenceInputs: rounds must be >= 1");
  if (initial_loss < loss_lower_bound) {
    throw std::invalid_argument("ConvergenceInputs: initial_loss must be >= loss_lower_bound");
  }
}

double default_delta(double smoothness, double alpha) {
  const double la = smoothness * alpha;
  const double d = 1.0 - la * la - 1e-6;
  return std::clamp(d, 1e-12, 1.0 - 1e-12);
}

namespace {

double variance_term(const ConvergenceInputs& inp, double uploader_count) {
  const double la = inp.smoothness * inp.alpha;
  return inp.smoothness * inp.alpha * inp.alpha * inp.max_updates * inp.variance_bound /
         (2.0 * inp.batch_size) *
         (inp.max_updates / uploader_count +
          la * (2.0 * inp.max_updates - 1.0) * (inp.max_updates - 1.0) / 6.0);
}

}  // namespace

double avg_grad_norm_bound(const ConvergenceInputs& inp) {
  inp.validate();
  const StepsizeConditionReport rep =
      check_stepsize_conditions(inp.smoothness, inp.alpha, inp.max_updates, inp.delta);
  if (!rep.pass) {
    throw ConditionsViolated("avg_grad_norm_bound: stepsize conditions fail (cond1 slack " +
                             std::to_string(rep.cond1_slack) + ", cond2 slack " +
                             std::to_string(rep.cond2_slack) + ")");
  }
  const double denom = inp.avg_updates - 1.0 + inp.delta;
  const double progress_term = 2.0 * (inp.initial_loss - inp.loss_lower_bound) /
                               (denom * inp.alpha * static_cast<double>(inp.rounds));
  // Same structure as the per-round variance term with S^j -> K, divided by
  // the descent coefficient and alpha/2.
  const double noise_term = variance_term(inp, static_cast<double>(inp.wait_for)) /
                            (denom * inp.alpha / 2.0);
  return progress_term + noise_term;
}

DescentCheckReport descent_bound_check(const ExperimentConfig& cfg,
                                            const Trace& trace,
                                            const ConvergenceInputs& inp,
                                            int replicates) {
  inp.validate();
  if (replicates < kMinDescentReplicates) {
    throw std::invalid_argument("descent_bound_check: needs at least " +
                                std::to_string(kMinDescentReplicates) + " replicates");
  }
  const StepsizeConditionReport rep =
      check_stepsize_conditions(inp.smoothness, inp.alpha, inp.max_updates, inp.delta);
  if (!rep.pass) {
    throw ConditionsViolated("descent_bound_check: stepsize conditions fail");
  }

  // Reconstruct the iterate sequence for the trace deterministically.
  auto data = build_dataset(cfg.dataset);
  const Objective obj(cfg.dataset.objective_kind(), data);
  const auto shards = partition_iid(data->size(), cfg.workers, cfg.master_seed);
  std::vector<ParamVector> iterates;
  run_experiment(cfg, obj, shards, &iterates);
  if (iterates.size() < trace.records.size()) {
    throw std::invalid_argument("descent_bound_check: trace/config mismatch");
  }

  DescentCheckReport report;
  report.replicates = replicates;
  long violations = 0;
  for (size_t idx = 0; idx < trace.records.size(); ++idx) {
    const RoundRecord& rec = trace.records[idx];
    const ParamVector& w = iterates[idx];
    const auto [loss_w, grad_w] = obj.full_loss_and_grad(w);

    double diff_sum = 0.0;
    for (int r = 1; r <= replicates; ++r) {
      const ParamVector next =
          replay_round(cfg, obj, shards, w, rec, static_cast<uint64_t>(r));
      diff_sum += obj.full_loss(next) - loss_w;
    }

    // Realized mean update count over this round's uploaders.
    double update_sum = 0.0;
    for (int count : rec.updates) update_sum += count;
    const double realized_avg = update_sum / std::max(1, rec.uploader_count);

    DescentRoundReport rr;
    rr.round = rec.round;
    rr.lhs_estimate = diff_sum / replicates;
    rr.rhs_bound = -0.5 * (realized_avg - 1.0 + inp.delta) * inp.alpha * squared_norm(grad_w) +
                   variance_term(inp, static_cast<double>(std::max(1, rec.uploader_count)));
    rr.margin = rr.rhs_bound - rr.lhs_estimate;
    rr.violated = rr.margin < 0.0;
    if (rr.violated) ++violations;
    report.rounds.push_back(rr);
  }
  report.violation_rate =
      report.rounds.empty() ? 0.0 : static_cast<double>(violations) / report.rounds.size();
  return report;
}

double empirical_avg_grad_norm(const Trace& trace) {
  double sum = 0.0;
  long count = 0;
  for (const RoundRecord& rec : trace.records) {
    if (rec.grad_sq_norm) {
      sum += *rec.grad_sq_norm;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("empirical_avg_grad_norm: no recorded gradients");
  return sum / static_cast<double>(count);
}

double empirical_avg_grad_norm(const std::vector<Trace>& replicates) {
  if (replicates.empty()) {
    throw std::invalid_argument("empirical_avg_grad_norm: no replicates");
  }
  double sum = 0.0;
  for (const Trace& t : replicates) sum += empirical_avg_grad_norm(t);
  return sum / static_cast<double>(replicates.size());
}

}  // namespace stsyn
