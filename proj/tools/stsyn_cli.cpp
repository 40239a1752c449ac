#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stsyn/analysis.hpp"
#include "stsyn/config.hpp"
#include "stsyn/quadrature.hpp"
#include "stsyn/timing.hpp"
#include "stsyn/trace_io.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

fs::path resolve_out_dir(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    if (const char* root = std::getenv("STSYN_OUT_ROOT")) {
      return fs::path(root) / p;
    }
  }
  return p;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

int run_analyze(int workers, int wait_for, int target_updates, double mu, double tol,
                long mc_trials, uint64_t mc_seed, bool as_json) {
  const stsyn::OrderStatParams params{workers, wait_for, target_updates};
  const stsyn::AnalyticsResult formula = stsyn::order_stat_analytics(params, mu, tol);
  const stsyn::McRoundStats mc =
      stsyn::monte_carlo_round_stats(params, mu, static_cast<uint64_t>(mc_trials), mc_seed);

  if (as_json) {
    ordered_json j;
    j["M"] = workers;
    j["K"] = wait_for;
    j["U"] = target_updates;
    j["mu"] = mu;
    j["t_bar"] = formula.t_bar;
    j["u_bar"] = formula.u_bar;
    j["s_bar"] = formula.s_bar;
    j["quadrature_abs_err"] = formula.quadrature_abs_err;
    j["mc_trials"] = mc.trials;
    j["t_bar_mc"] = mc.t_bar_mc;
    j["u_bar_mc"] = mc.u_bar_mc;
    j["s_bar_mc"] = mc.s_bar_mc;
    j["t_bar_se"] = mc.t_bar_se;
    j["u_bar_se"] = mc.u_bar_se;
    j["s_bar_se"] = mc.s_bar_se;
    std::cout << j.dump(2) << "\n";
    return 0;
  }

  std::cout << "M=" << workers << " K=" << wait_for << " U=" << target_updates
            << " mu=" << stsyn::format_double(mu) << "\n";
  std::cout << "metric      formula              monte-carlo (" << mc.trials
            << " rounds)\n";
  std::cout << "t_bar       " << stsyn::format_double(formula.t_bar) << "    "
            << stsyn::format_double(mc.t_bar_mc) << " +/- "
            << stsyn::format_double(mc.t_bar_se) << "\n";
  std::cout << "u_bar       " << stsyn::format_double(formula.u_bar) << "    "
            << stsyn::format_double(mc.u_bar_mc) << " +/- "
            << stsyn::format_double(mc.u_bar_se) << "\n";
  std::cout << "s_bar       " << stsyn::format_double(formula.s_bar) << "    "
            << stsyn::format_double(mc.s_bar_mc) << " +/- "
            << stsyn::format_double(mc.s_bar_se) << "\n";
  return 0;
}

int run_simulate(const std::string& config_path, const std::string& out) {
  const stsyn::ExperimentConfig cfg = stsyn::load_config(config_path);
  const std::string started = stsyn::iso_timestamp_now();
  const stsyn::Trace trace = stsyn::run_experiment(cfg);
  const fs::path dir = resolve_out_dir(out);
  const stsyn::RunManifest manifest = stsyn::persist_trace(trace, dir, started);
  std::cout << "wrote " << manifest.rounds << " rounds to " << dir.string()
            << " (termination: " << manifest.termination
            << ", config " << manifest.config_hash << ")\n";
  return 0;
}

int run_sweep_cmd(const std::string& config_path, const std::string& axis_name,
                  const std::string& values_text, const std::string& out) {
  const stsyn::ExperimentConfig base = stsyn::load_config(config_path);
  const stsyn::SweepAxis axis = stsyn::sweep_axis_from_string(axis_name);
  const std::vector<std::string> values = split_csv(values_text);
  if (values.empty()) throw std::invalid_argument("sweep: --values is empty");

  const std::string started = stsyn::iso_timestamp_now();
  const auto points = stsyn::run_sweep(base, axis, values);
  const fs::path dir = resolve_out_dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  std::string comparison = "value,rounds,termination,final_loss,time_to_target,comm_to_target\n";
  std::vector<const stsyn::Trace*> traces;
  std::vector<std::string> labels;
  for (const auto& point : points) {
    comparison += point.value + ",";
    if (!point.trace) {
      comparison += ",error: " + point.error + ",,,\n";
      std::cerr << "point " << point.value << " failed: " << point.error << "\n";
      continue;
    }
    const stsyn::Trace& trace = *point.trace;
    stsyn::persist_trace(trace, dir / (axis_name + "=" + point.value), started);
    traces.push_back(&trace);
    labels.push_back(axis_name + "=" + point.value);

    comparison += std::to_string(trace.records.size()) + "," +
                  stsyn::termination_to_string(trace.termination) + ",";
    const auto& last = trace.records.back();
    comparison += last.loss ? stsyn::format_double(*last.loss) : std::string();
    comparison += ",";
    if (trace.config.target) {
      const auto ttt = stsyn::time_to_target(trace, *trace.config.target);
      const auto ctt = stsyn::comm_to_target(trace, *trace.config.target);
      comparison += ttt ? stsyn::format_double(*ttt) : std::string();
      comparison += ",";
      comparison += ctt ? std::to_string(*ctt) : std::string();
    } else {
      comparison += ",";
    }
    comparison += "\n";
  }
  {
    std::ofstream f(dir / "comparison.csv", std::ios::binary);
    f << comparison;
  }
  for (const auto metric : {stsyn::PlotMetric::time, stsyn::PlotMetric::comm}) {
    std::ofstream f(dir / (metric == stsyn::PlotMetric::time ? "plot_time.csv"
                                                             : "plot_comm.csv"),
                    std::ios::binary);
    stsyn::emit_plot_data(traces, labels, metric, f);
  }
  std::cout << "swept " << axis_name << " over " << values.size() << " values into "
            << dir.string() << "\n";
  return 0;
}

double scheme_avg_updates(const stsyn::ExperimentConfig& cfg) {
  switch (cfg.scheme.kind) {
    case stsyn::SchemeSpec::Kind::stsyn:
      return stsyn::avg_local_updates(
          {cfg.workers, cfg.scheme.wait_for, cfg.scheme.local_updates});
    case stsyn::SchemeSpec::Kind::pasgd:
    case stsyn::SchemeSpec::Kind::fedavg:
    case stsyn::SchemeSpec::Kind::adacomm:
      return cfg.scheme.local_updates;
    case stsyn::SchemeSpec::Kind::ksync:
    case stsyn::SchemeSpec::Kind::adasync:
      return 1.0;
  }
  throw std::logic_error("bad scheme");
}

int scheme_wait_count(const stsyn::ExperimentConfig& cfg) {
  switch (cfg.scheme.kind) {
    case stsyn::SchemeSpec::Kind::stsyn:
    case stsyn::SchemeSpec::Kind::ksync:
    case stsyn::SchemeSpec::Kind::adasync:
      return cfg.scheme.wait_for;
    case stsyn::SchemeSpec::Kind::pasgd:
    case stsyn::SchemeSpec::Kind::adacomm:
      return cfg.workers;
    case stsyn::SchemeSpec::Kind::fedavg:
      return cfg.scheme.sample_size;
  }
  throw std::logic_error("bad scheme");
}

int run_verify_bound(const std::string& trace_dir, double f_star_override,
                     bool have_f_star, int descent_replicates,
                     const std::string& report_path) {
  const fs::path dir(trace_dir);
  const stsyn::ExperimentConfig cfg = stsyn::load_config((dir / "config.cfg").string());

  stsyn::Trace trace;
  trace.config = cfg;
  trace.records = stsyn::load_trace_records(dir);
  if (trace.records.empty()) throw std::runtime_error("verify-bound: trace has no rounds");

  auto data = stsyn::build_dataset(cfg.dataset);
  const stsyn::Objective obj(cfg.dataset.objective_kind(), data);
  const auto shards = stsyn::partition_iid(data->size(), cfg.workers, cfg.master_seed);
  std::vector<stsyn::ParamVector> iterates;
  stsyn::run_experiment(cfg, obj, shards, &iterates);

  stsyn::ConvergenceInputs inp;
  inp.smoothness = obj.smoothness();
  inp.alpha = cfg.alpha;
  inp.batch_size = cfg.batch_size;
  inp.rounds = static_cast<long>(trace.records.size());
  inp.wait_for = scheme_wait_count(cfg);
  inp.avg_updates = scheme_avg_updates(cfg);
  inp.delta = stsyn::default_delta(inp.smoothness, inp.alpha);

  int max_updates = 1;
  for (const auto& rec : trace.records) {
    for (int u : rec.updates) max_updates = std::max(max_updates, u);
  }
  inp.max_updates = max_updates + 1;
  inp.avg_updates = std::min(inp.avg_updates, inp.max_updates);

  // Variance bound: enumerate the dataset at the start point, the optimum
  // when known, the origin, and a subsample of visited iterates.
  std::vector<stsyn::ParamVector> probes;
  probes.push_back(iterates.front());
  probes.emplace_back(obj.dim(), 0.0);
  if (obj.minimizer()) probes.push_back(*obj.minimizer());
  const size_t stride = std::max<size_t>(1, iterates.size() / 16);
  for (size_t i = stride; i < iterates.size(); i += stride) probes.push_back(iterates[i]);
  inp.variance_bound = stsyn::estimate_variance_bound(obj, probes);

  inp.initial_loss = obj.full_loss(iterates.front());
  if (have_f_star) {
    inp.loss_lower_bound = f_star_override;
  } else if (obj.optimal_value()) {
    inp.loss_lower_bound = *obj.optimal_value();
  } else {
    throw std::runtime_error(
        "verify-bound: objective has no analytic minimum; pass --f-star");
  }

  const stsyn::StepsizeConditionReport cond = stsyn::check_stepsize_conditions(
      inp.smoothness, inp.alpha, inp.max_updates, inp.delta);
  ordered_json j;
  j["config_hash"] = stsyn::config_hash_hex(cfg);
  j["inputs"] = {{"L", inp.smoothness},       {"alpha", inp.alpha},
                 {"C", inp.variance_bound},   {"B", inp.batch_size},
                 {"U0", inp.max_updates},     {"u_bar", inp.avg_updates},
                 {"delta", inp.delta},        {"K", inp.wait_for},
                 {"J", inp.rounds},           {"F0", inp.initial_loss},
                 {"F_star", inp.loss_lower_bound}};
  j["conditions"] = {{"pass", cond.pass},
                     {"cond1_value", cond.cond1_value},
                     {"cond1_slack", cond.cond1_slack},
                     {"cond2_slack", cond.cond2_slack}};

  std::cout << "stepsize conditions: " << (cond.pass ? "pass" : "FAIL")
            << " (cond1 " << stsyn::format_double(cond.cond1_value)
            << " <= 1, slack " << stsyn::format_double(cond.cond1_slack)
            << "; cond2 slack " << stsyn::format_double(cond.cond2_slack) << ")\n";

  int exit_code = 0;
  if (cond.pass) {
    const double bound = stsyn::avg_grad_norm_bound(inp);
    const double empirical = stsyn::empirical_avg_grad_norm(trace);
    const bool dominated = empirical <= bound;
    j["bound"] = bound;
    j["empirical_avg_grad_norm"] = empirical;
    j["bound_holds"] = dominated;
    std::cout << "avg-gradient bound:  " << stsyn::format_double(bound) << "\n";
    std::cout << "empirical average:   " << stsyn::format_double(empirical)
              << (dominated ? "  (within bound)" : "  (BOUND VIOLATED)") << "\n";
    if (!dominated) exit_code = 3;

    if (descent_replicates > 0) {
      const stsyn::DescentCheckReport rep =
          stsyn::descent_bound_check(cfg, trace, inp, descent_replicates);
      j["descent"] = {{"replicates", rep.replicates},
                      {"violation_rate", rep.violation_rate}};
      std::cout << "per-round descent:   violation rate "
                << stsyn::format_double(rep.violation_rate) << " over "
                << rep.rounds.size() << " rounds at " << rep.replicates
                << " replicates\n";
    }
  } else {
    j["bound"] = nullptr;
    exit_code = 3;
  }

  if (!report_path.empty()) {
    std::ofstream f(resolve_out_dir(report_path), std::ios::binary);
    f << j.dump(2) << "\n";
  }
  return exit_code;
}

int run_trace_stats(const std::string& trace_dir, long round) {
  const auto records = stsyn::load_trace_records(trace_dir);
  if (records.empty()) throw std::runtime_error("trace-stats: trace has no rounds");
  const stsyn::RoundRecord* rec = nullptr;
  if (round < 0) {
    rec = &records.back();
  } else {
    for (const auto& r : records) {
      if (r.round == round) {
        rec = &r;
        break;
      }
    }
  }
  if (!rec) throw std::runtime_error("trace-stats: round " + std::to_string(round) +
                                     " not in trace");
  std::map<int, int> histogram;
  for (int u : rec->updates) histogram[u] += 1;
  std::cout << "updates,count\n";
  for (const auto& [updates, count] : histogram) {
    std::cout << updates << "," << count << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator and analytics for straggler-tolerant local SGD"};
  app.require_subcommand(1);

  // analyze
  auto* analyze = app.add_subcommand(
      "analyze", "Closed-form round statistics with a Monte-Carlo cross-check");
  int a_workers = 0, a_wait = 0, a_updates = 0;
  double a_mu = 0.0, a_tol = 0.0;
  long a_trials = 200;
  uint64_t a_seed = 1;
  bool a_json = false;
  analyze->add_option("--M", a_workers, "number of workers")->required();
  analyze->add_option("--K", a_wait, "completions the server waits for")->required();
  analyze->add_option("--U", a_updates, "local updates per acknowledgment")->required();
  analyze->add_option("--mu", a_mu, "mean per-update compute time (s)")->required();
  analyze->add_option("--tol", a_tol, "quadrature absolute tolerance (default: relative 1e-8)");
  analyze->add_option("--mc-trials", a_trials, "Monte-Carlo rounds (default 200)");
  analyze->add_option("--mc-seed", a_seed, "Monte-Carlo seed (default 1)");
  analyze->add_flag("--json", a_json, "emit JSON instead of a table");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run one experiment and persist its trace");
  std::string s_config, s_out;
  simulate->add_option("--config", s_config, "experiment config file")->required();
  simulate->add_option("--out", s_out, "output directory")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run an axis sweep with shared randomness");
  std::string w_config, w_axis, w_values, w_out;
  sweep->add_option("--config", w_config, "base experiment config file")->required();
  sweep->add_option("--axis", w_axis, "sweep axis: K, U or scheme")->required();
  sweep->add_option("--values", w_values, "comma-separated axis values")->required();
  sweep->add_option("--out", w_out, "output directory")->required();

  // verify-bound
  auto* verify = app.add_subcommand(
      "verify-bound", "Check the average-gradient bound against a recorded trace");
  std::string v_trace, v_report;
  double v_fstar = 0.0;
  int v_replicates = 0;
  verify->add_option("--trace", v_trace, "trace directory (from simulate)")->required();
  auto* fstar_opt = verify->add_option("--f-star", v_fstar, "objective lower bound override");
  verify->add_option("--replicates", v_replicates,
                     "also run the per-round descent check with this many replicates");
  verify->add_option("--out", v_report, "write the JSON report here");

  // trace-stats
  auto* stats = app.add_subcommand("trace-stats",
                                   "Histogram of per-worker update counts for one round");
  std::string t_trace;
  long t_round = -1;
  stats->add_option("--trace", t_trace, "trace directory")->required();
  stats->add_option("--round", t_round, "round index (default: last)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) {
      return run_analyze(a_workers, a_wait, a_updates, a_mu, a_tol, a_trials, a_seed, a_json);
    }
    if (simulate->parsed()) return run_simulate(s_config, s_out);
    if (sweep->parsed()) return run_sweep_cmd(w_config, w_axis, w_values, w_out);
    if (verify->parsed()) {
      return run_verify_bound(v_trace, v_fstar, fstar_opt->count() > 0, v_replicates,
                              v_report);
    }
    if (stats->parsed()) return run_trace_stats(t_trace, t_round);
  } catch (const stsyn::ConfigError& e) {
    nlohmann::json err{{"error", e.what()}, {"key", e.key()}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
