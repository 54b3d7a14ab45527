#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairdiv/market.hpp"
#include "fairdiv/policies.hpp"

namespace fairdiv {

/// Max over rounds and types of |u(X_alg[t, theta]) - u(X_opt[theta])|.
double counterfactual_envy(const AllocationTrace& trace, const Matrix& x_opt, const Matrix& weights);

/// Total leftover: sum over resources of B_k minus everything handed out.
double efficiency_gap(const AllocationTrace& trace);

/// Max over rounds t, t' and types theta, theta' of how much theta prefers
/// the bundle handed to theta' in round t' over its own bundle in round t.
double hindsight_envy(const AllocationTrace& trace, const Matrix& weights);

/// Max over rounds and types of u(B / N) - u(X_alg[t, theta]), N the realized total.
double prop_gap(const AllocationTrace& trace, const Matrix& weights, const Vector& budgets);

struct RunMetrics {
  std::string setting;
  std::string policy;
  std::string envy_budget_rule;
  int rounds = 0;
  double envy_budget = 0.0;
  std::uint64_t seed = 0;
  int run = 0;

  double delta_ef = 0.0;
  double delta_efficiency = 0.0;
  double envy = 0.0;
  double delta_prop = 0.0;
  bool concentration = false;
  int fallback_count = 0;

  /// |u(X_alg[t, theta]) - u(X_opt[theta])| for every round and type.
  Matrix utility_deviation;
};

/// All four metrics of one trace against its hindsight-optimal allocation.
RunMetrics evaluate_run(const AllocationTrace& trace, const Matrix& x_opt, const Matrix& weights,
                        const Vector& budgets);

struct AggregateMetrics {
  std::string setting;
  std::string policy;
  std::string envy_budget_rule;
  int rounds = 0;
  double envy_budget = 0.0;
  int runs = 0;

  double mean_delta_ef = 0.0;
  double mean_delta_efficiency = 0.0;
  double mean_envy = 0.0;
  double mean_delta_prop = 0.0;
  /// max over (t, theta) of the mean across runs of |u(X_alg) - u(X_opt)|.
  double delta_ef_plus = 0.0;
  /// Fraction of runs with delta_ef above the guardrails' largest utility gap.
  double envy_violation_frequency = 0.0;
  double concentration_frequency = 0.0;
};

/// Slack allowed on top of the utility gap before a run counts as a violation.
inline constexpr double kEnvyViolationSlack = 1e-6;

/// Reports must share setting, policy, horizon and envy budget.
AggregateMetrics aggregate(const std::vector<RunMetrics>& reports, double utility_gap_max);

}  // namespace fairdiv
