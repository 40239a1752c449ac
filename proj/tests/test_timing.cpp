#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stsyn/timing.hpp"

using namespace stsyn;

TEST_CASE("single worker: mean round time is the Erlang mean") {
  CHECK(erlang_round_time_mean({1, 1, 3}, 2.0) == doctest::Approx(6.0).epsilon(1e-7));
  CHECK(avg_local_updates({1, 1, 7}) == doctest::Approx(7.0).epsilon(1e-7));
}

TEST_CASE("reference round statistics for M=40 K=30 U=2") {
  const OrderStatParams p{40, 30, 2};
  CHECK(avg_local_updates(p) == doctest::Approx(2.6352).epsilon(2e-4));
  CHECK(erlang_round_time_mean(p, 1e-4) == doctest::Approx(2.6352e-4).epsilon(2e-4));
  CHECK(avg_upload_count(p) == doctest::Approx(37.132).epsilon(1.4e-4));
}

TEST_CASE("quadrature agrees with the Monte-Carlo oracle") {
  const OrderStatParams p{5, 3, 1};
  const double formula = erlang_round_time_mean(p, 1.0);
  const McRoundStats mc = monte_carlo_round_stats(p, 1.0, 1'000'000, 2024);
  CHECK(std::fabs(formula - mc.t_bar_mc) < 3.0 * mc.t_bar_se);
}

TEST_CASE("avg_local_updates against the oracle at M=10 K=5 U=3") {
  const OrderStatParams p{10, 5, 3};
  const double formula = avg_local_updates(p);
  const McRoundStats mc = monte_carlo_round_stats(p, 1.0, 200'000, 11);
  CHECK(std::fabs(formula - mc.t_bar_mc) / formula < 0.01);
}

TEST_CASE("upload count approximation near saturation") {
  // Every worker has finished many updates: the formula must approach M.
  const OrderStatParams p{4, 4, 100};
  const double s = avg_upload_count(p);
  CHECK(s <= 4.0);
  CHECK(4.0 - s < 1e-6 * 4.0);
}

TEST_CASE("empirical uploaders match the approximation within 2 percent") {
  const OrderStatParams p{40, 30, 2};
  const McRoundStats mc = monte_carlo_round_stats(p, 1e-4, 200, 1);
  CHECK(std::fabs(mc.s_bar_mc - avg_upload_count(p)) / avg_upload_count(p) < 0.02);
}

TEST_CASE("first-update order statistic") {
  CHECK(first_update_order_stat_mean(1, 10, 1.0, HeadCountMode::exact) ==
        doctest::Approx(0.1).epsilon(1e-14));
  // harmonic number by direct forward summation, the independent route
  double h40 = 0.0;
  for (int i = 1; i <= 40; ++i) h40 += 1.0 / i;
  CHECK(first_update_order_stat_mean(40, 40, 1.0, HeadCountMode::exact) ==
        doctest::Approx(h40).epsilon(1e-12));
  CHECK(h40 == doctest::Approx(4.2785).epsilon(1e-4));

  const double exact = first_update_order_stat_mean(30, 40, 1.0, HeadCountMode::exact);
  const double approx = first_update_order_stat_mean(30, 40, 1.0, HeadCountMode::approximate);
  CHECK(std::fabs(exact - approx) / exact < 0.15);

  CHECK_THROWS_AS(first_update_order_stat_mean(40, 40, 1.0, HeadCountMode::approximate),
                  std::domain_error);
  CHECK_THROWS_AS(first_update_order_stat_mean(0, 10, 1.0, HeadCountMode::exact),
                  std::domain_error);
}

TEST_CASE("degenerate monte carlo counts exactly") {
  const McRoundStats mc = monte_carlo_round_stats({1, 1, 1}, 0.5, 100'000, 3);
  CHECK(mc.u_bar_mc == 1.0);
  CHECK(mc.s_bar_mc == 1.0);
}

TEST_CASE("oracle self-consistency at M=3 K=2 U=2") {
  const OrderStatParams p{3, 2, 2};
  const double formula = erlang_round_time_mean(p, 1.0);
  const McRoundStats mc = monte_carlo_round_stats(p, 1.0, 1'000'000, 77);
  CHECK(std::fabs(formula - mc.t_bar_mc) < 3.0 * mc.t_bar_se);
}

TEST_CASE("average updates grow with the wait count") {
  const int m = 10, u = 3;
  double prev = 0.0;
  for (int k = 1; k <= m; ++k) {
    const double val = avg_local_updates({m, k, u});
    CHECK(val >= prev);
    prev = val;
  }
  // waiting for one worker can only lose updates; waiting for all only adds
  CHECK(avg_local_updates({m, 1, u}) <= u);
  CHECK(avg_local_updates({m, m, u}) >= u);
}

TEST_CASE("update count is invariant to the time scale") {
  const OrderStatParams p{12, 7, 2};
  const double reference = avg_local_updates(p);
  for (double mu : {1e-4, 1.0, 37.0}) {
    const double scaled = erlang_round_time_mean(p, mu) / mu;
    CHECK(std::fabs(scaled - reference) <= 1e-12 * reference);
  }
}

TEST_CASE("upload count stays within the worker count") {
  for (int m : {2, 7, 40}) {
    for (int k = 1; k <= m; k += std::max(1, m / 3)) {
      for (int u : {1, 2, 5}) {
        const double s = avg_upload_count({m, k, u});
        CHECK(s > 0.0);
        CHECK(s <= m);
      }
    }
  }
}

TEST_CASE("analytics bundle is internally consistent") {
  const AnalyticsResult r = order_stat_analytics({8, 5, 2}, 3.0);
  CHECK(r.t_bar == doctest::Approx(r.u_bar * 3.0).epsilon(1e-15));
  CHECK(r.s_bar == doctest::Approx(8.0 - 8.0 * std::exp(-r.u_bar)).epsilon(1e-13));
  CHECK(r.quadrature_abs_err < 1e-6);
}

TEST_CASE("random parameter draws stay consistent with the oracle") {
  RngStream pick(2718);
  for (int trial = 0; trial < 6; ++trial) {
    const int m = 1 + static_cast<int>(pick.next_below(60));
    const int k = 1 + static_cast<int>(pick.next_below(m));
    const int u = 1 + static_cast<int>(pick.next_below(9));
    const OrderStatParams p{m, k, u};
    const double formula = erlang_round_time_mean(p, 1.0);
    const McRoundStats mc = monte_carlo_round_stats(p, 1.0, 100'000, 9000 + trial);
    const double tol = std::max(4.0 * mc.t_bar_se, 0.01 * formula);
    INFO("M=", m, " K=", k, " U=", u);
    CHECK(std::fabs(formula - mc.t_bar_mc) <= tol);
  }
}

TEST_CASE("parameter validation names the offending field") {
  CHECK_THROWS_AS(avg_local_updates({0, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(avg_local_updates({4, 5, 1}), std::invalid_argument);
  CHECK_THROWS_AS(avg_local_updates({4, 0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(avg_local_updates({4, 2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(erlang_round_time_mean({4, 2, 1}, 0.0), std::invalid_argument);
}
