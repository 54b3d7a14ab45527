#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairdiv/arrivals.hpp"
#include "fairdiv/guardrails.hpp"
#include "fairdiv/market.hpp"

namespace fairdiv {

/// Which rule set the allocation of one resource in one round.
enum class Branch { Fallback, Upper, Lower };

const char* to_string(Branch branch);

/// Everything an online policy did over one horizon.
struct AllocationTrace {
  std::string policy;
  std::uint64_t seed = 0;
  ArrivalMatrix arrivals;           // T x types
  std::vector<Matrix> allocations;  // per round: types x K, per individual
  Matrix budget_path;               // (T+1) x K, budget before each round
  std::vector<std::vector<Branch>> branches;  // T x K

  int rounds() const { return static_cast<int>(allocations.size()); }
  int num_types() const { return static_cast<int>(arrivals.cols()); }
  int num_resources() const { return static_cast<int>(budget_path.cols()); }
  Vector initial_budget() const { return budget_path.row(0).transpose(); }
  Vector leftover() const { return budget_path.row(budget_path.rows() - 1).transpose(); }
  int fallback_count() const;
};

/// Adaptive-threshold policy: per round and resource, fall back to an even
/// split when the lower guardrail is unaffordable, allocate the upper guardrail
/// when the remaining budget still covers the lower guardrail for all future
/// arrivals up to their confidence width, and the lower guardrail otherwise.
AllocationTrace guarded_hope(const Guardrails& guardrails, const HorizonSpec& horizon,
                             const Vector& budgets, const ArrivalMatrix& arrivals);

/// Baseline: always the lower guardrail until a resource runs out.
AllocationTrace fixed_threshold(const Guardrails& guardrails, const HorizonSpec& horizon,
                                const Vector& budgets, const ArrivalMatrix& arrivals);

/// Eisenberg-Gale solution at the realized totals; one allocation per type,
/// shared by every round.
EGSolution hindsight_optimal(const ArrivalMatrix& arrivals, const MarketInstance& market,
                             const SolverOptions& solver = {});

}  // namespace fairdiv
