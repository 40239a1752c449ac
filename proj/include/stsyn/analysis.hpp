#pragma once

#include <stdexcept>
#include <vector>

#include "stsyn/simulator.hpp"

namespace stsyn {

// Raised when a bound is requested outside the stepsize regime that grants
// it.
class ConditionsViolated : public std::runtime_error {
 public:
  explicit ConditionsViolated(const std::string& what) : std::runtime_error(what) {}
};

struct StepsizeConditionReport {
  bool pass = false;
  double cond1_value = 0.0;  // L^2 a^2 (U0+1)(U0-2)/2 + L a U0, must be <= 1
  double cond1_slack = 0.0;  // 1 - cond1_value
  double cond2_slack = 0.0;  // (1 - delta) - L^2 a^2, must be >= 0
};

// Evaluates both stepsize inequalities at the worst case U = U0.
StepsizeConditionReport check_stepsize_conditions(double smoothness, double alpha,
                                                double max_updates, double delta);

// Everything the average-gradient bound needs.
struct ConvergenceInputs {
  double smoothness = 0.0;     // L
  double alpha = 0.0;          // stepsize
  double variance_bound = 0.0; // C
  int batch_size = 0;          // B
  double max_updates = 0.0;    // U0, upper bound on per-round update counts
  double avg_updates = 0.0;    // expected per-worker updates per round
  double delta = 0.0;          // free constant in (0,1)
  int wait_for = 0;            // K
  long rounds = 0;             // J
  double initial_loss = 0.0;   // F(w^0)
  double loss_lower_bound = 0.0;  // F*

  void validate() const;
};

// Largest delta the second stepsize condition permits, clamped into (0,1);
// larger delta tightens the bound.
double default_delta(double smoothness, double alpha);

// Upper bound on (1/J) sum_j ||grad F(w^j)||^2. Refuses (throws
// ConditionsViolated) when the stepsize conditions fail.
double avg_grad_norm_bound(const ConvergenceInputs& inp);

struct DescentRoundReport {
  long round = 0;
  double lhs_estimate = 0.0;  // mean one-step objective difference over replicates
  double rhs_bound = 0.0;
  double margin = 0.0;  // rhs - lhs; negative means violated
  bool violated = false;
};

struct DescentCheckReport {
  std::vector<DescentRoundReport> rounds;
  int replicates = 0;
  double violation_rate = 0.0;
};

inline constexpr int kMinDescentReplicates = 8;

// Per-round one-step descent check: freezes each recorded iterate, re-runs
// the round's plan with `replicates` independent batch streams, and compares
// the mean realized objective change against the descent bound evaluated
// with the realized uploader set and update counts.
DescentCheckReport descent_bound_check(const ExperimentConfig& cfg,
                                            const Trace& trace,
                                            const ConvergenceInputs& inp,
                                            int replicates);

// (1/J) sum of recorded squared gradient norms.
double empirical_avg_grad_norm(const Trace& trace);
// Mean of the per-trace averages.
double empirical_avg_grad_norm(const std::vector<Trace>& replicates);

}  // namespace stsyn
