#include "fairdiv/guardrails.hpp"

#include <cmath>
#include <sstream>

namespace fairdiv {

double envy_scale(const MarketInstance& expected_instance) {
  const double w_inf = expected_instance.weight_max();
  return w_inf * w_inf / (expected_instance.weight_min() * expected_instance.beta_avg().minCoeff());
}

double compute_c(double envy_budget, double gamma, double w_min, double w_inf, double beta_min) {
  const double c = (w_min * beta_min / (w_inf * w_inf)) * envy_budget * (1.0 + gamma) - gamma;
  if (!(c > 0.0)) {
    std::ostringstream msg;
    msg << "envy budget L_T = " << envy_budget << " is below feasibility: shrink factor c = " << c
        << " <= 0";
    throw InfeasibleEnvyBudget(msg.str());
  }
  if (!(c < 1.0)) {
    std::ostringstream msg;
    msg << "envy budget L_T = " << envy_budget << " is too large: shrink factor c = " << c << " >= 1";
    throw InfeasibleEnvyBudget(msg.str());
  }
  return c;
}

double compute_gamma(const HorizonSpec& horizon, const Vector& expected_counts) {
  if (expected_counts.size() != horizon.num_types())
    throw ValidationError("expected counts do not match the horizon's types");
  double gamma = 0.0;
  for (int i = 0; i < horizon.num_types(); ++i) {
    if (!(expected_counts[i] > 0.0)) throw ValidationError("expected counts must be positive");
    gamma = std::max(gamma, horizon.conf(0, i) / expected_counts[i]);
  }
  return gamma;
}

double min_feasible_envy_budget(const HorizonSpec& horizon, const MarketInstance& expected_instance) {
  return 2.0 * envy_scale(expected_instance) * compute_gamma(horizon, expected_instance.counts());
}

Guardrails build_guardrails(const MarketInstance& expected_instance, const HorizonSpec& horizon,
                            double envy_budget, const SolverOptions& solver) {
  if (expected_instance.num_types() != horizon.num_types())
    throw ValidationError("instance and horizon disagree on the number of types");

  Guardrails g;
  g.envy_budget = envy_budget;
  g.expected_counts = expected_instance.counts();
  g.gamma = compute_gamma(horizon, g.expected_counts);

  const double w_min = expected_instance.weight_min();
  const double w_inf = expected_instance.weight_max();
  const Vector beta = expected_instance.beta_avg();
  const double beta_min = beta.minCoeff();
  g.c = compute_c(envy_budget, g.gamma, w_min, w_inf, beta_min);

  g.n_upper = (1.0 + g.gamma) * g.expected_counts;
  g.n_lower = (1.0 - g.c) * g.expected_counts;

  const EGSolution optimistic = solve_eg(expected_instance.with_counts(g.n_lower), solver);
  const EGSolution pessimistic = solve_eg(expected_instance.with_counts(g.n_upper), solver);
  g.x_upper = optimistic.allocation;
  g.x_lower = pessimistic.allocation;
  g.prices_at_n_lower = optimistic.prices;
  g.prices_at_n_upper = pessimistic.prices;

  const Matrix w = expected_instance.weight_matrix();
  g.utility_gap = (g.x_upper - g.x_lower).cwiseProduct(w).rowwise().sum();

  auto& d = g.diagnostics;
  d.gamma_at_most_half = g.gamma <= 0.5;
  d.meets_sufficient_envy_budget = envy_budget >= 2.0 * envy_scale(expected_instance) * g.gamma;
  d.sandwich_guaranteed = g.c >= g.gamma;
  d.gap_within_relaxed_bound =
      g.utility_gap_max() <= (1.0 + g.gamma) / (1.0 - g.c) * envy_budget + solver.tolerance;
  d.allocation_gap = (g.x_upper - g.x_lower).cwiseAbs().maxCoeff();
  d.allocation_gap_lower_bound = envy_budget * beta_min * beta_min * w_min / w_inf;
  d.allocation_gap_upper_bound =
      envy_budget * expected_instance.budgets().maxCoeff() * beta_min * w_min / w_inf;
  d.allocation_gap_above_lower = d.allocation_gap >= d.allocation_gap_lower_bound;
  d.allocation_gap_below_upper = d.allocation_gap <= d.allocation_gap_upper_bound;
  return g;
}

}  // namespace fairdiv
