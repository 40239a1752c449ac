#include "stsyn/timing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "stsyn/gamma.hpp"
#include "stsyn/quadrature.hpp"

namespace stsyn {

TimingModel::TimingModel(double mean_update_time, uint64_t seed, uint64_t stream_id)
    : mean_(mean_update_time),
      stream_(derive_seed(seed, Stream::timing, stream_id)) {
  if (!(mean_ > 0.0) || std::isinf(mean_)) {
    throw std::invalid_argument("TimingModel: mean_update_time must be positive and finite");
  }
}

void OrderStatParams::validate() const {
  if (workers < 1) throw std::invalid_argument("OrderStatParams: workers must be >= 1");
  if (wait_for < 1 || wait_for > workers) {
    throw std::invalid_argument("OrderStatParams: wait_for must satisfy 1 <= wait_for <= workers");
  }
  if (target_updates < 1) {
    throw std::invalid_argument("OrderStatParams: target_updates must be >= 1");
  }
}

namespace {

// E[T_{K:M}] for Erlang(U, 1) variables, i.e. time measured in units of the
// mean update time. Scaling back to seconds is exact, which keeps
// t_bar = u_bar * mu an identity rather than a tolerance.
QuadratureOutcome unit_round_time_mean(const OrderStatParams& p, double abs_tol) {
  const int m = p.workers;
  const int k = p.wait_for;
  const int u = p.target_updates;

  const double log_coeff = std::lgamma(m + 1.0) - std::lgamma(static_cast<double>(k)) -
                           std::lgamma(static_cast<double>(m - k + 1));

  // Upper limit: survival of even the slowest worker is negligible beyond it.
  double hi = u + 10.0;
  while (m * gamma_q(u, hi) * hi > 1e-14) hi *= 1.4;

  // The density can concentrate near the minimum-order-statistic scale u/m;
  // force subdivision fine enough that the first panels cannot straddle the
  // whole spike and report zero.
  const double spike_scale = static_cast<double>(u) / m;
  int min_depth = 7;
  while (min_depth < 24 && hi / std::pow(2.0, min_depth) > 0.25 * spike_scale) {
    ++min_depth;
  }

  const auto integrand = [&](double x) -> double {
    if (x <= 0.0) return 0.0;
    const double cdf = gamma_p(u, x);
    if (k > 1 && cdf <= 0.0) return 0.0;
    if (m > k && cdf >= 1.0) return 0.0;
    double log_f = log_coeff + (u - 1) * std::log(x) - x - std::lgamma(static_cast<double>(u));
    if (k > 1) log_f += (k - 1) * std::log(cdf);
    if (m > k) log_f += (m - k) * std::log1p(-cdf);
    return x * std::exp(log_f);
  };

  if (abs_tol <= 0.0) {
    // Two passes: rough value first, then the default relative tolerance.
    const QuadratureOutcome rough = adaptive_simpson(integrand, 0.0, hi, 1e-4 * (u + 1.0),
                                                     48, 20'000'000, min_depth);
    abs_tol = std::max(rough.value * kDefaultQuadratureRelTol, 1e-12);
  }
  return adaptive_simpson(integrand, 0.0, hi, abs_tol, 48, 20'000'000, min_depth);
}

}  // namespace

double erlang_round_time_mean(const OrderStatParams& p, double mu, double abs_tol) {
  p.validate();
  if (!(mu > 0.0)) throw std::invalid_argument("erlang_round_time_mean: mu must be > 0");
  const double unit_tol = abs_tol > 0.0 ? abs_tol / mu : 0.0;
  return mu * unit_round_time_mean(p, unit_tol).value;
}

double avg_local_updates(const OrderStatParams& p, double abs_tol) {
  p.validate();
  return unit_round_time_mean(p, abs_tol).value;
}

double avg_upload_count(const OrderStatParams& p, double abs_tol) {
  const double u_bar = avg_local_updates(p, abs_tol);
  return p.workers - p.workers * std::exp(-u_bar);
}

AnalyticsResult order_stat_analytics(const OrderStatParams& p, double mu, double abs_tol) {
  p.validate();
  if (!(mu > 0.0)) throw std::invalid_argument("order_stat_analytics: mu must be > 0");
  const QuadratureOutcome q = unit_round_time_mean(p, abs_tol);
  AnalyticsResult r;
  r.u_bar = q.value;
  r.t_bar = q.value * mu;
  r.s_bar = p.workers - p.workers * std::exp(-q.value);
  r.quadrature_abs_err = q.abs_error;
  return r;
}

double first_update_order_stat_mean(int finishers, int workers, double mu,
                                    HeadCountMode mode) {
  if (workers < 1 || finishers < 1 || finishers > workers) {
    throw std::domain_error("first_update_order_stat_mean: requires 1 <= finishers <= workers");
  }
  if (!(mu > 0.0)) throw std::domain_error("first_update_order_stat_mean: mu must be > 0");
  if (mode == HeadCountMode::exact) {
    // Sum smallest terms first.
    double sum = 0.0;
    for (int i = workers; i >= workers - finishers + 1; --i) sum += 1.0 / i;
    return mu * sum;
  }
  if (finishers == workers) {
    throw std::domain_error(
        "first_update_order_stat_mean: approximate mode undefined at finishers == workers");
  }
  return mu * std::log(static_cast<double>(workers) / (workers - finishers));
}

McRoundStats monte_carlo_round_stats(const OrderStatParams& p, double mu,
                                     uint64_t trials, uint64_t seed) {
  p.validate();
  if (!(mu > 0.0)) throw std::invalid_argument("monte_carlo_round_stats: mu must be > 0");
  if (trials < 1) throw std::invalid_argument("monte_carlo_round_stats: trials must be >= 1");

  const int m = p.workers;
  const int k = p.wait_for;
  const int u = p.target_updates;

  std::vector<double> prefix(static_cast<size_t>(m) * u);  // time to finish update i+1
  std::vector<double> finish(m);
  std::vector<double> finish_sorted(m);

  double t_sum = 0.0, t_sq = 0.0;
  double u_sum = 0.0, u_sq = 0.0;
  double s_sum = 0.0, s_sq = 0.0;

  for (uint64_t trial = 0; trial < trials; ++trial) {
    RngStream rs(derive_seed(seed, Stream::mc_trial, trial));
    for (int w = 0; w < m; ++w) {
      double t = 0.0;
      double* row = prefix.data() + static_cast<size_t>(w) * u;
      for (int i = 0; i < u; ++i) {
        t += rs.next_exponential(mu);
        row[i] = t;
      }
      finish[w] = t;
    }
    finish_sorted = finish;
    std::nth_element(finish_sorted.begin(), finish_sorted.begin() + (k - 1),
                     finish_sorted.end());
    const double cutoff = finish_sorted[k - 1];

    long total_updates = 0;
    int uploaders = 0;
    for (int w = 0; w < m; ++w) {
      int count;
      if (finish[w] <= cutoff) {
        count = u;
        // Fast workers keep computing past the acknowledgment threshold;
        // extra draws are independent of the cutoff, so sampling them lazily
        // here is distribution-exact.
        double t = finish[w];
        for (;;) {
          t += rs.next_exponential(mu);
          if (t > cutoff) break;
          ++count;
        }
      } else {
        const double* row = prefix.data() + static_cast<size_t>(w) * u;
        count = static_cast<int>(std::upper_bound(row, row + u, cutoff) - row);
      }
      total_updates += count;
      if (count >= 1) ++uploaders;
    }

    const double u_mean = static_cast<double>(total_updates) / m;
    t_sum += cutoff;
    t_sq += cutoff * cutoff;
    u_sum += u_mean;
    u_sq += u_mean * u_mean;
    s_sum += uploaders;
    s_sq += static_cast<double>(uploaders) * uploaders;
  }

  const double n = static_cast<double>(trials);
  const auto stderr_of = [n](double sum, double sq) {
    if (n < 2) return 0.0;
    const double var = std::max(0.0, (sq - sum * sum / n) / (n - 1));
    return std::sqrt(var / n);
  };

  McRoundStats out;
  out.trials = trials;
  out.t_bar_mc = t_sum / n;
  out.u_bar_mc = u_sum / n;
  out.s_bar_mc = s_sum / n;
  out.t_bar_se = stderr_of(t_sum, t_sq);
  out.u_bar_se = stderr_of(u_sum, u_sq);
  out.s_bar_se = stderr_of(s_sum, s_sq);
  return out;
}

}  // namespace stsyn
