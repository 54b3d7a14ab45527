// Command-line front end: solve markets, inspect guardrails, simulate
// policies, run experiments and fit scaling laws.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "fairdiv/errors.hpp"
#include "fairdiv/guardrails.hpp"
#include "fairdiv/harness.hpp"
#include "fairdiv/io.hpp"
#include "fairdiv/market.hpp"
#include "fairdiv/metrics.hpp"
#include "fairdiv/policies.hpp"

namespace fs = std::filesystem;
using namespace fairdiv;

namespace {

void print_vector(std::ostream& out, const char* label, const Vector& v) {
  out << std::setw(16) << std::left << label;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << std::setprecision(10) << v[i];
  out << '\n';
}

void print_matrix(std::ostream& out, const char* label, const Matrix& m,
                  const std::vector<AgentType>& types) {
  out << label << ":\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << "  " << std::setw(14) << std::left << types[i].id;
    for (Eigen::Index k = 0; k < m.cols(); ++k) out << ' ' << std::setprecision(10) << m(i, k);
    out << '\n';
  }
}

int cmd_solve(const std::string& file, double tol, long max_iters, bool as_json) {
  const MarketInstance instance = parse_instance(read_json(file));
  const EGSolution sol = solve_eg(instance, {tol, max_iters});
  if (as_json) {
    std::cout << to_json(instance, sol).dump(2) << '\n';
    return 0;
  }
  print_matrix(std::cout, "allocation", sol.allocation, instance.types());
  print_vector(std::cout, "prices", sol.prices);
  print_vector(std::cout, "utilities", sol.utilities(instance));
  std::cout << "kkt_residual     " << sol.kkt_residual << "\niterations       " << sol.iterations << '\n';
  return 0;
}

int cmd_guardrails(const std::string& file, double lt, bool as_json) {
  const HorizonFile hf = parse_horizon(read_json(file));
  const double minimum = min_feasible_envy_budget(hf.horizon, hf.expected);
  const Guardrails g = build_guardrails(hf.expected, hf.horizon, lt);
  if (as_json) {
    auto doc = to_json(g);
    doc["min_feasible_L_T"] = minimum;
    std::cout << doc.dump(2) << '\n';
    return 0;
  }
  std::cout << "L_T              " << g.envy_budget << "\nmin feasible L_T " << minimum << "\ngamma            "
            << g.gamma << "\nc                " << g.c << '\n';
  print_vector(std::cout, "E[N]", g.expected_counts);
  print_vector(std::cout, "n_upper", g.n_upper);
  print_vector(std::cout, "n_lower", g.n_lower);
  print_matrix(std::cout, "X_upper (solved at n_lower)", g.x_upper, hf.expected.types());
  print_matrix(std::cout, "X_lower (solved at n_upper)", g.x_lower, hf.expected.types());
  print_vector(std::cout, "utility gap", g.utility_gap);
  const auto& d = g.diagnostics;
  std::cout << "diagnostics: sandwich_guaranteed=" << d.sandwich_guaranteed
            << " gap_within_relaxed_bound=" << d.gap_within_relaxed_bound
            << " allocation_gap=" << d.allocation_gap << " in [" << d.allocation_gap_lower_bound << ", "
            << d.allocation_gap_upper_bound << "]\n";
  return 0;
}

int cmd_simulate(const std::string& file, const std::string& policy, double lt, std::uint64_t seed,
                 const std::string& trace_path) {
  const HorizonFile hf = parse_horizon(read_json(file));
  const Guardrails g = build_guardrails(hf.expected, hf.horizon, lt);
  Rng rng(derive_seed(seed, 0));
  const ArrivalMatrix arrivals = hf.horizon.sample_arrivals(rng);
  const Vector budgets = hf.expected.budgets();
  AllocationTrace trace = parse_policy(policy) == PolicyKind::GuardedHope
                              ? guarded_hope(g, hf.horizon, budgets, arrivals)
                              : fixed_threshold(g, hf.horizon, budgets, arrivals);
  trace.seed = seed;
  const EGSolution opt = hindsight_optimal(arrivals, hf.expected);
  const RunMetrics m = evaluate_run(trace, opt.allocation, hf.expected.weight_matrix(), budgets);

  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    if (!out) throw ValidationError("cannot write " + trace_path);
    std::vector<std::string> ids;
    for (const auto& t : hf.expected.types()) ids.push_back(t.id);
    write_trace_csv(out, trace, ids);
  }
  std::cout << "policy           " << trace.policy << "\nseed             " << seed
            << "\nconcentration    " << (hf.horizon.concentration_holds(arrivals) ? "yes" : "no")
            << "\ndelta_ef         " << m.delta_ef << "\ndelta_efficiency " << m.delta_efficiency
            << "\nenvy             " << m.envy << "\ndelta_prop       " << m.delta_prop
            << "\nfallbacks        " << m.fallback_count << '\n';
  return 0;
}

int cmd_experiment(const std::string& what, const std::string& out_dir, std::optional<std::uint64_t> seed,
                   std::optional<int> runs, int parallel, const std::string& locations,
                   const std::vector<int>& horizons) {
  ExperimentConfig config;
  if (fs::is_regular_file(what)) {
    config = parse_experiment_config(read_json(what), fs::path(what).parent_path());
  } else {
    std::vector<LocationParams> pool;
    if (!locations.empty()) pool = load_locations(locations);
    config = builtin_experiment(what, pool);
  }
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (config.output_dir.empty()) throw ValidationError("no output directory; pass --out <dir>");
  if (seed) config.base_seed = *seed;
  if (runs) config.runs = *runs;
  if (!horizons.empty()) config.horizons = horizons;
  const ExperimentResult result = run_experiment_to_disk(config, {parallel});
  write_aggregate_csv(std::cout, result.aggregates);
  return 0;
}

int cmd_report(const std::string& file, const std::string& metric, const std::string& policy,
               const std::string& rule) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open " + file);
  const auto rows = read_aggregate_csv(in);
  std::vector<std::string> rules;
  if (!rule.empty()) {
    rules.push_back(rule);
  } else {
    for (const auto& r : rows) {
      if (r.policy == policy && r.feasible && std::find(rules.begin(), rules.end(), r.rule) == rules.end())
        rules.push_back(r.rule);
    }
  }
  if (rules.empty()) throw ValidationError("no feasible rows for policy '" + policy + "'");
  for (const auto& r : rules) {
    const ScalingFit fit = scaling_fit(rows, metric, policy, r, &std::cerr);
    std::cout << policy << " L_T=" << r << " log(" << metric << ") ~ log(T): slope " << fit.slope
              << " intercept " << fit.intercept << " r2 " << fit.r_squared << " (" << fit.points
              << " points)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential fair division: market solver, guardrails, online policies and experiments"};
  app.require_subcommand(1);

  auto* solve = app.add_subcommand("solve", "Solve an Eisenberg-Gale instance file");
  std::string instance_file;
  double tol = 1e-8;
  long max_iters = 200'000;
  bool solve_json = false;
  solve->add_option("file", instance_file, "Instance JSON")->required()->check(CLI::ExistingFile);
  solve->add_option("--tol", tol, "KKT residual tolerance");
  solve->add_option("--max-iters", max_iters, "Iteration cap");
  solve->add_flag("--json", solve_json, "Print JSON");

  auto* guard = app.add_subcommand("guardrails", "Build guardrails for a horizon file");
  std::string guard_file;
  double guard_lt = 0.0;
  bool guard_json = false;
  guard->add_option("file", guard_file, "Horizon JSON")->required()->check(CLI::ExistingFile);
  guard->add_option("--lt", guard_lt, "Envy budget L_T")->required();
  guard->add_flag("--json", guard_json, "Print JSON");

  auto* sim = app.add_subcommand("simulate", "Run one policy over one sampled horizon");
  std::string sim_file, sim_policy = "guarded-hope", sim_trace;
  double sim_lt = 0.0;
  std::uint64_t sim_seed = 0;
  sim->add_option("file", sim_file, "Horizon JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--policy", sim_policy, "guarded-hope or fixed-threshold")
      ->check(CLI::IsMember({"guarded-hope", "fixed-threshold"}));
  sim->add_option("--lt", sim_lt, "Envy budget L_T")->required();
  sim->add_option("--seed", sim_seed, "Seed");
  sim->add_option("--trace", sim_trace, "Write the allocation trace CSV here");

  auto* exp = app.add_subcommand("experiment", "Run a built-in or configured Monte-Carlo experiment");
  std::string exp_what, exp_out, exp_locations;
  std::optional<std::uint64_t> exp_seed;
  std::optional<int> exp_runs;
  int exp_parallel = 1;
  std::vector<int> exp_horizons;
  exp->add_option("setting", exp_what, "Built-in name or config JSON")->required();
  exp->add_option("--out", exp_out, "Output directory");
  exp->add_option("--seed", exp_seed, "Base seed");
  exp->add_option("--runs", exp_runs, "Runs per (T, policy)");
  exp->add_option("--parallel", exp_parallel, "Worker threads")->check(CLI::PositiveNumber);
  exp->add_option("--locations", exp_locations, "Location pool CSV (mu,sigma) for fbst-style settings");
  exp->add_option("--T", exp_horizons, "Horizons to run");

  auto* report = app.add_subcommand("report", "Fit log(metric) against log(T) from an aggregate CSV");
  std::string report_file, report_metric = "waste", report_policy = "guarded-hope", report_rule;
  report->add_option("file", report_file, "aggregate.csv")->required()->check(CLI::ExistingFile);
  report->add_option("--fit", report_metric, "waste, delta_ef, delta_ef_plus, envy or delta_prop");
  report->add_option("--policy", report_policy, "Policy name");
  report->add_option("--rule", report_rule, "Envy budget rule label, e.g. 2*T^(-1/3)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(instance_file, tol, max_iters, solve_json);
    if (*guard) return cmd_guardrails(guard_file, guard_lt, guard_json);
    if (*sim) return cmd_simulate(sim_file, sim_policy, sim_lt, sim_seed, sim_trace);
    if (*exp)
      return cmd_experiment(exp_what, exp_out, exp_seed, exp_runs, exp_parallel, exp_locations, exp_horizons);
    if (*report) return cmd_report(report_file, report_metric, report_policy, report_rule);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
