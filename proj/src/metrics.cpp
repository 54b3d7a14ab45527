#include "fairdiv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fairdiv/errors.hpp"

namespace fairdiv {

namespace {

void check_weights(const AllocationTrace& trace, const Matrix& weights) {
  if (weights.rows() != trace.num_types() || weights.cols() != trace.num_resources())
    throw ValidationError("weight matrix does not match the trace");
}

// u[t, theta] for the bundle each type received in each round.
Matrix own_utilities(const AllocationTrace& trace, const Matrix& weights) {
  Matrix u(trace.rounds(), trace.num_types());
  for (int t = 0; t < trace.rounds(); ++t) {
    u.row(t) = trace.allocations[t].cwiseProduct(weights).rowwise().sum().transpose();
  }
  return u;
}

}  // namespace

double counterfactual_envy(const AllocationTrace& trace, const Matrix& x_opt, const Matrix& weights) {
  check_weights(trace, weights);
  if (x_opt.rows() != weights.rows() || x_opt.cols() != weights.cols())
    throw ValidationError("hindsight allocation does not match the weights");
  const Vector target = x_opt.cwiseProduct(weights).rowwise().sum();
  const Matrix u = own_utilities(trace, weights);
  return (u.rowwise() - target.transpose()).cwiseAbs().maxCoeff();
}

double efficiency_gap(const AllocationTrace& trace) {
  Vector spent = Vector::Zero(trace.num_resources());
  for (int t = 0; t < trace.rounds(); ++t) {
    const Vector n = trace.arrivals.row(t).transpose().cast<double>();
    spent += trace.allocations[t].transpose() * n;
  }
  return (trace.initial_budget() - spent).sum();
}

double hindsight_envy(const AllocationTrace& trace, const Matrix& weights) {
  check_weights(trace, weights);
  const int types = trace.num_types();
  double envy = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < types; ++i) {
    double best_other = -std::numeric_limits<double>::infinity();
    double worst_own = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trace.rounds(); ++t) {
      const Matrix& x = trace.allocations[t];
      for (int j = 0; j < types; ++j) best_other = std::max(best_other, weights.row(i).dot(x.row(j)));
      worst_own = std::min(worst_own, weights.row(i).dot(x.row(i)));
    }
    envy = std::max(envy, best_other - worst_own);
  }
  return envy;
}

double prop_gap(const AllocationTrace& trace, const Matrix& weights, const Vector& budgets) {
  check_weights(trace, weights);
  if (budgets.size() != trace.num_resources()) throw ValidationError("budgets do not match the trace");
  const double people = trace.arrivals.cast<double>().sum();
  const Vector share_utility = weights * (budgets / people);
  const Matrix u = own_utilities(trace, weights);
  return (-(u.rowwise() - share_utility.transpose())).maxCoeff();
}

RunMetrics evaluate_run(const AllocationTrace& trace, const Matrix& x_opt, const Matrix& weights,
                        const Vector& budgets) {
  RunMetrics m;
  m.policy = trace.policy;
  m.rounds = trace.rounds();
  m.seed = trace.seed;
  m.delta_ef = counterfactual_envy(trace, x_opt, weights);
  m.delta_efficiency = efficiency_gap(trace);
  m.envy = hindsight_envy(trace, weights);
  m.delta_prop = prop_gap(trace, weights, budgets);
  m.fallback_count = trace.fallback_count();
  const Vector target = x_opt.cwiseProduct(weights).rowwise().sum();
  m.utility_deviation = (own_utilities(trace, weights).rowwise() - target.transpose()).cwiseAbs();
  return m;
}

AggregateMetrics aggregate(const std::vector<RunMetrics>& reports, double utility_gap_max) {
  if (reports.empty()) throw ValidationError("nothing to aggregate");
  const RunMetrics& head = reports.front();
  AggregateMetrics agg;
  agg.setting = head.setting;
  agg.policy = head.policy;
  agg.envy_budget_rule = head.envy_budget_rule;
  agg.rounds = head.rounds;
  agg.envy_budget = head.envy_budget;
  agg.runs = static_cast<int>(reports.size());

  Matrix deviation_sum = Matrix::Zero(head.utility_deviation.rows(), head.utility_deviation.cols());
  int violations = 0;
  int concentrated = 0;
  for (const auto& r : reports) {
    if (r.setting != head.setting || r.policy != head.policy || r.rounds != head.rounds ||
        r.envy_budget_rule != head.envy_budget_rule || r.envy_budget != head.envy_budget) {
      throw ValidationError("cannot aggregate runs from different configurations");
    }
    if (r.utility_deviation.rows() != deviation_sum.rows() ||
        r.utility_deviation.cols() != deviation_sum.cols()) {
      throw ValidationError("runs disagree on the shape of their utility deviations");
    }
    agg.mean_delta_ef += r.delta_ef;
    agg.mean_delta_efficiency += r.delta_efficiency;
    agg.mean_envy += r.envy;
    agg.mean_delta_prop += r.delta_prop;
    deviation_sum += r.utility_deviation;
    if (r.delta_ef > utility_gap_max + kEnvyViolationSlack) ++violations;
    if (r.concentration) ++concentrated;
  }
  const double runs = agg.runs;
  agg.mean_delta_ef /= runs;
  agg.mean_delta_efficiency /= runs;
  agg.mean_envy /= runs;
  agg.mean_delta_prop /= runs;
  agg.delta_ef_plus = deviation_sum.size() == 0 ? 0.0 : deviation_sum.maxCoeff() / runs;
  agg.envy_violation_frequency = violations / runs;
  agg.concentration_frequency = concentrated / runs;
  return agg;
}

}  // namespace fairdiv
