#pragma once

#include <cstdint>

#include "stsyn/rng.hpp"

namespace stsyn {

// Per-update compute-time model: i.i.d. exponential draws with the given
// mean, from a dedicated stream keyed by (seed, stream_id).
class TimingModel {
 public:
  TimingModel(double mean_update_time, uint64_t seed, uint64_t stream_id);

  double mean_update_time() const { return mean_; }
  double sample_update_time() { return stream_.next_exponential(mean_); }

 private:
  double mean_;
  RngStream stream_;
};

struct OrderStatParams {
  int workers;         // M
  int wait_for;        // K, completions the server waits for
  int target_updates;  // U, updates each worker must acknowledge

  void validate() const;  // throws std::invalid_argument naming the field
};

struct AnalyticsResult {
  double t_bar;               // mean round time: K-th order stat of Erlang(U) times
  double u_bar;               // mean per-worker completed updates, t_bar / mu
  double s_bar;               // mean uploader count, M - M*exp(-u_bar)
  double quadrature_abs_err;  // error estimate of the order-statistic integral
};

inline constexpr double kDefaultQuadratureRelTol = 1e-8;

// Mean of the K-th smallest of M i.i.d. Erlang(U, mu) completion times,
// by adaptive quadrature of the order-statistic density. abs_tol <= 0 picks
// the default relative tolerance. Throws QuadratureError on nonconvergence.
double erlang_round_time_mean(const OrderStatParams& p, double mu, double abs_tol = 0.0);

// u_bar = E[T_{K:M}] / mu; independent of mu.
double avg_local_updates(const OrderStatParams& p, double abs_tol = 0.0);

// s_bar ~= M - M * exp(-u_bar): expected number of workers that finish at
// least one update before the round cutoff.
double avg_upload_count(const OrderStatParams& p, double abs_tol = 0.0);

// All three expectations in one pass.
AnalyticsResult order_stat_analytics(const OrderStatParams& p, double mu,
                                     double abs_tol = 0.0);

enum class HeadCountMode { exact, approximate };

// Mean time for the s-th fastest of M workers to finish its first update:
// exact partial harmonic sum, or the log approximation (undefined at s = M).
double first_update_order_stat_mean(int finishers, int workers, double mu,
                                    HeadCountMode mode);

struct McRoundStats {
  double t_bar_mc = 0.0;
  double u_bar_mc = 0.0;
  double s_bar_mc = 0.0;
  double t_bar_se = 0.0;
  double u_bar_se = 0.0;
  double s_bar_se = 0.0;
  uint64_t trials = 0;
};

// Ground-truth oracle: simulates independent rounds of the wait-for-K
// protocol (per-update exponential sampling, cutoff at the K-th U-update
// completion, in-progress updates cancelled) and reports empirical means
// with standard errors. Closed forms are validated against this, never the
// other way around.
McRoundStats monte_carlo_round_stats(const OrderStatParams& p, double mu,
                                     uint64_t trials, uint64_t seed);

}  // namespace stsyn
