#pragma once

#include "fairdiv/arrivals.hpp"
#include "fairdiv/errors.hpp"
#include "fairdiv/market.hpp"

namespace fairdiv {

/// The envy budget is too small (c <= 0) or too large (c >= 1) for the
/// requested horizon; the guardrails would be meaningless.
class InfeasibleEnvyBudget : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Non-fatal checks of the guardrail construction against its textbook bounds.
struct GuardrailDiagnostics {
  bool gamma_at_most_half = false;          // concentration hypothesis gamma <= 1/2
  bool meets_sufficient_envy_budget = false;  // L_T >= min_feasible_envy_budget
  bool sandwich_guaranteed = false;          // c >= gamma, so n_lower <= N on the event
  bool gap_within_relaxed_bound = false;     // utility gap <= (1+gamma)/(1-c) * L_T
  bool allocation_gap_above_lower = false;   // ||X_upper - X_lower|| >= lower bound
  bool allocation_gap_below_upper = false;   // ||X_upper - X_lower|| <= upper bound
  double allocation_gap = 0.0;
  double allocation_gap_lower_bound = 0.0;
  double allocation_gap_upper_bound = 0.0;
};

/// Upper and lower per-type allocations sandwiching the hindsight-optimal
/// fair allocation with high probability.
///
/// `x_upper` is the market solution at the deflated counts `n_lower`, and
/// `x_lower` the solution at the inflated counts `n_upper`.
struct Guardrails {
  double envy_budget = 0.0;  // L_T
  double gamma = 0.0;
  double c = 0.0;
  Vector expected_counts;
  Vector n_upper;
  Vector n_lower;
  Matrix x_upper;
  Matrix x_lower;
  Vector prices_at_n_lower;
  Vector prices_at_n_upper;
  Vector utility_gap;
  GuardrailDiagnostics diagnostics;

  double utility_gap_max() const { return utility_gap.maxCoeff(); }
};

/// Normalisation constant ||w||_inf^2 / (||w||_min * ||beta_avg||_min) of an instance.
double envy_scale(const MarketInstance& expected_instance);

/// Pessimistic shrink factor (w_min * beta_min / w_inf^2) * L_T * (1 + gamma) - gamma.
/// Throws InfeasibleEnvyBudget unless the result lies in (0, 1).
double compute_c(double envy_budget, double gamma, double w_min, double w_inf, double beta_min);

/// max over types of Conf_{0,theta} / E[N_theta].
double compute_gamma(const HorizonSpec& horizon, const Vector& expected_counts);

/// Sufficient envy budget 2 * scale * gamma under which c >= gamma.
double min_feasible_envy_budget(const HorizonSpec& horizon, const MarketInstance& expected_instance);

/// Solve the two guardrail markets once, before the first round.
/// `expected_instance` carries the weights, budgets and expected total counts.
Guardrails build_guardrails(const MarketInstance& expected_instance, const HorizonSpec& horizon,
                            double envy_budget, const SolverOptions& solver = {});

}  // namespace fairdiv
