#include "fairdiv/policies.hpp"

#include <algorithm>

#include "fairdiv/errors.hpp"

namespace fairdiv {

const char* to_string(Branch branch) {
  switch (branch) {
    case Branch::Fallback:
      return "fallback";
    case Branch::Upper:
      return "upper";
    case Branch::Lower:
      return "lower";
  }
  return "?";
}

int AllocationTrace::fallback_count() const {
  int count = 0;
  for (const auto& row : branches) count += static_cast<int>(std::count(row.begin(), row.end(), Branch::Fallback));
  return count;
}

namespace {

void check_shapes(const Guardrails& g, const HorizonSpec& horizon, const Vector& budgets,
                  const ArrivalMatrix& arrivals) {
  const auto types = g.x_lower.rows();
  if (g.x_upper.rows() != types || g.x_upper.cols() != g.x_lower.cols())
    throw ValidationError("guardrail matrices disagree in shape");
  if (budgets.size() != g.x_lower.cols())
    throw ValidationError("budget vector does not match the guardrails' resources");
  if (horizon.num_types() != types) throw ValidationError("horizon does not match the guardrails' types");
  if (arrivals.rows() != horizon.rounds() || arrivals.cols() != types)
    throw ValidationError("arrival matrix must be T x types");
  if ((arrivals.array() < 1).any()) throw ValidationError("arrival counts must be >= 1");
}

AllocationTrace start_trace(const char* name, const Vector& budgets, const ArrivalMatrix& arrivals) {
  AllocationTrace trace;
  trace.policy = name;
  trace.arrivals = arrivals;
  const auto rounds = arrivals.rows();
  trace.allocations.reserve(rounds);
  trace.branches.reserve(rounds);
  trace.budget_path = Matrix::Zero(rounds + 1, budgets.size());
  trace.budget_path.row(0) = budgets.transpose();
  return trace;
}

// Spend the round's allocation and record the budget before the next round.
void close_round(AllocationTrace& trace, int t, const Vector& arrivals, Matrix allocation,
                 std::vector<Branch> branches) {
  for (Eigen::Index k = 0; k < allocation.cols(); ++k) {
    double next = trace.budget_path(t, k) - arrivals.dot(allocation.col(k));
    // An even split can overshoot by a rounding error; it empties the resource.
    if (branches[k] == Branch::Fallback) next = std::max(next, 0.0);
    trace.budget_path(t + 1, k) = next;
  }
  trace.allocations.push_back(std::move(allocation));
  trace.branches.push_back(std::move(branches));
}

}  // namespace

AllocationTrace guarded_hope(const Guardrails& g, const HorizonSpec& horizon, const Vector& budgets,
                             const ArrivalMatrix& arrivals) {
  check_shapes(g, horizon, budgets, arrivals);
  AllocationTrace trace = start_trace("guarded-hope", budgets, arrivals);
  const int types = static_cast<int>(g.x_lower.rows());
  const int resources = static_cast<int>(budgets.size());

  // Future demand reserve per type, indexed by the 1-based round t.
  Matrix reserve(horizon.rounds() + 1, types);
  for (int t = 0; t <= horizon.rounds(); ++t) {
    for (int i = 0; i < types; ++i) reserve(t, i) = horizon.tail_mean(t, i) + horizon.conf(t, i);
  }

  for (int r = 0; r < horizon.rounds(); ++r) {
    const int t = r + 1;
    const Vector n = arrivals.row(r).transpose().cast<double>();
    const double people = n.sum();
    Matrix allocation(types, resources);
    std::vector<Branch> branches(resources);
    for (int k = 0; k < resources; ++k) {
      const double budget = trace.budget_path(r, k);
      if (budget < n.dot(g.x_lower.col(k))) {
        allocation.col(k).setConstant(budget / people);
        branches[k] = Branch::Fallback;
      } else if (budget - n.dot(g.x_upper.col(k)) >= g.x_lower.col(k).dot(reserve.row(t).transpose())) {
        allocation.col(k) = g.x_upper.col(k);
        branches[k] = Branch::Upper;
      } else {
        allocation.col(k) = g.x_lower.col(k);
        branches[k] = Branch::Lower;
      }
    }
    close_round(trace, r, n, std::move(allocation), std::move(branches));
  }
  return trace;
}

AllocationTrace fixed_threshold(const Guardrails& g, const HorizonSpec& horizon, const Vector& budgets,
                                const ArrivalMatrix& arrivals) {
  check_shapes(g, horizon, budgets, arrivals);
  AllocationTrace trace = start_trace("fixed-threshold", budgets, arrivals);
  const int types = static_cast<int>(g.x_lower.rows());
  const int resources = static_cast<int>(budgets.size());

  for (int r = 0; r < horizon.rounds(); ++r) {
    const Vector n = arrivals.row(r).transpose().cast<double>();
    Matrix allocation(types, resources);
    std::vector<Branch> branches(resources);
    for (int k = 0; k < resources; ++k) {
      const double budget = trace.budget_path(r, k);
      if (budget < n.dot(g.x_lower.col(k))) {
        allocation.col(k).setConstant(budget / n.sum());
        branches[k] = Branch::Fallback;
      } else {
        allocation.col(k) = g.x_lower.col(k);
        branches[k] = Branch::Lower;
      }
    }
    close_round(trace, r, n, std::move(allocation), std::move(branches));
  }
  return trace;
}

EGSolution hindsight_optimal(const ArrivalMatrix& arrivals, const MarketInstance& market,
                             const SolverOptions& solver) {
  if (arrivals.cols() != market.num_types())
    throw ValidationError("arrival matrix does not match the market's types");
  const Vector totals = arrivals.colwise().sum().transpose().cast<double>();
  if ((totals.array() < 1.0).any()) throw ValidationError("every type needs at least one arrival");
  return solve_eg(market.with_counts(totals), solver);
}

}  // namespace fairdiv
