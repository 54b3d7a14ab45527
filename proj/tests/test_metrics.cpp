#include <doctest.h>

#include <cmath>
#include <random>

#include "fairdiv/errors.hpp"
#include "fairdiv/metrics.hpp"

using namespace fairdiv;

namespace {

AllocationTrace scalar_trace(std::vector<double> allocations, std::vector<int> arrivals, double budget) {
  AllocationTrace trace;
  trace.policy = "test";
  const int rounds = static_cast<int>(allocations.size());
  trace.arrivals = ArrivalMatrix(rounds, 1);
  trace.budget_path = Matrix(rounds + 1, 1);
  trace.budget_path(0, 0) = budget;
  for (int t = 0; t < rounds; ++t) {
    trace.arrivals(t, 0) = arrivals[t];
    trace.allocations.push_back(Matrix::Constant(1, 1, allocations[t]));
    trace.branches.push_back({Branch::Upper});
    trace.budget_path(t + 1, 0) = trace.budget_path(t, 0) - arrivals[t] * allocations[t];
  }
  return trace;
}

AllocationTrace random_trace(std::mt19937_64& rng, int rounds, int types, int resources) {
  std::uniform_real_distribution<double> unit(0.0, 2.0);
  std::uniform_int_distribution<int> count(1, 4);
  AllocationTrace trace;
  trace.arrivals = ArrivalMatrix(rounds, types);
  trace.budget_path = Matrix::Zero(rounds + 1, resources);
  for (int t = 0; t < rounds; ++t) {
    Matrix x(types, resources);
    for (int i = 0; i < types; ++i) {
      trace.arrivals(t, i) = count(rng);
      for (int k = 0; k < resources; ++k) x(i, k) = unit(rng);
    }
    trace.allocations.push_back(x);
    trace.branches.push_back(std::vector<Branch>(resources, Branch::Lower));
  }
  for (int k = 0; k < resources; ++k) trace.budget_path(0, k) = 1000.0;
  return trace;
}

// Literal enumeration over (t, t', theta, theta').
double envy_by_enumeration(const AllocationTrace& trace, const Matrix& w) {
  double best = -1e300;
  for (int t = 0; t < trace.rounds(); ++t)
    for (int s = 0; s < trace.rounds(); ++s)
      for (int i = 0; i < trace.num_types(); ++i)
        for (int j = 0; j < trace.num_types(); ++j)
          best = std::max(best, w.row(i).dot(trace.allocations[s].row(j)) - w.row(i).dot(trace.allocations[t].row(i)));
  return best;
}

}  // namespace

TEST_CASE("counterfactual envy on the hand traces") {
  const Matrix w = Matrix::Ones(1, 1);
  const Matrix opt = Matrix::Constant(1, 1, 4.0 / 3.0);
  CHECK(counterfactual_envy(scalar_trace({1.2, 1.2, 1.2}, {1, 1, 1}, 4), opt, w) == doctest::Approx(2.0 / 15.0));
  CHECK(counterfactual_envy(scalar_trace({0.9, 0.9, 0.9}, {1, 1, 1}, 4), opt, w) ==
        doctest::Approx(0.4333).epsilon(1e-4));
  CHECK(counterfactual_envy(scalar_trace({4.0 / 3, 4.0 / 3, 4.0 / 3}, {1, 1, 1}, 4), opt, w) ==
        doctest::Approx(0.0));
  CHECK_THROWS_AS(counterfactual_envy(scalar_trace({1}, {1}, 1), Matrix::Ones(2, 1), w), ValidationError);
}

TEST_CASE("efficiency gap") {
  CHECK(efficiency_gap(scalar_trace({1.2, 1.2, 1.2}, {1, 1, 1}, 4)) == doctest::Approx(0.4));
  CHECK(efficiency_gap(scalar_trace({0, 0, 0}, {1, 2, 1}, 4)) == doctest::Approx(4.0));
  CHECK(efficiency_gap(scalar_trace({1, 1}, {2, 2}, 4)) == doctest::Approx(0.0));
}

TEST_CASE("hindsight envy") {
  const Matrix w1 = Matrix::Ones(1, 1);
  CHECK(hindsight_envy(scalar_trace({1, 1, 1}, {1, 1, 1}, 4), w1) == doctest::Approx(0.0));
  CHECK(hindsight_envy(scalar_trace({1.2, 1.2, 0.9}, {1, 1, 1}, 4), w1) == doctest::Approx(0.3));

  AllocationTrace two;
  two.arrivals = ArrivalMatrix::Ones(2, 2);
  two.budget_path = Matrix::Constant(3, 2, 2.0);
  Matrix x(2, 2);
  x << 1, 0, 0, 1;
  two.allocations = {x, x};
  two.branches = {{Branch::Upper, Branch::Upper}, {Branch::Upper, Branch::Upper}};
  Matrix w(2, 2);
  w << 1, 1, 1, 2;
  CHECK(hindsight_envy(two, w) == doctest::Approx(0.0));

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto trace = random_trace(rng, 6, 3, 2);
    Matrix wr = Matrix::Random(3, 2).cwiseAbs();
    CHECK(hindsight_envy(trace, wr) == doctest::Approx(envy_by_enumeration(trace, wr)));
    CHECK(hindsight_envy(trace, wr) >= 0.0);
  }
}

TEST_CASE("proportionality gap") {
  const Matrix w = Matrix::Ones(1, 1);
  const Vector b = Vector::Constant(1, 4.0);
  CHECK(prop_gap(scalar_trace({1.2, 1.2, 1.2}, {1, 1, 1}, 4), w, b) == doctest::Approx(2.0 / 15.0));
  CHECK(prop_gap(scalar_trace({4.0 / 3, 4.0 / 3, 4.0 / 3}, {1, 1, 1}, 4), w, b) == doctest::Approx(0.0));
  CHECK(prop_gap(scalar_trace({0, 0, 0}, {1, 1, 1}, 4), w, b) == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("aggregation") {
  const Matrix w = Matrix::Ones(1, 1);
  const Matrix opt = Matrix::Constant(1, 1, 4.0 / 3.0);
  const Vector b = Vector::Constant(1, 4.0);
  const auto single = evaluate_run(scalar_trace({1.2, 1.2, 1.2}, {1, 1, 1}, 4), opt, w, b);
  const auto agg1 = aggregate({single}, 1.0);
  CHECK(agg1.runs == 1);
  CHECK(agg1.mean_delta_ef == doctest::Approx(single.delta_ef));
  CHECK(agg1.mean_delta_efficiency == doctest::Approx(single.delta_efficiency));
  CHECK(agg1.mean_envy == doctest::Approx(single.envy));
  CHECK(agg1.mean_delta_prop == doctest::Approx(single.delta_prop));
  CHECK(agg1.delta_ef_plus == doctest::Approx(single.delta_ef));

  RunMetrics a = single, c = single;
  a.delta_ef = 0.1;
  c.delta_ef = 0.3;
  const auto agg2 = aggregate({a, c}, 0.2);
  CHECK(agg2.mean_delta_ef == doctest::Approx(0.2));
  CHECK(agg2.envy_violation_frequency == doctest::Approx(0.5));

  c.policy = "other";
  CHECK_THROWS_AS(aggregate({a, c}, 0.2), ValidationError);
  CHECK_THROWS_AS(aggregate({}, 0.2), ValidationError);
}

TEST_CASE("ex-ante envy never exceeds the worst run") {
  std::mt19937_64 rng(4);
  const Matrix w = (Matrix(2, 2) << 1, 2, 3, 1).finished();
  const Matrix opt = (Matrix(2, 2) << 0.5, 0.5, 1, 0.2).finished();
  const Vector b = Vector::Constant(2, 100.0);
  std::vector<RunMetrics> reports;
  double worst = 0.0;
  for (int r = 0; r < 100; ++r) {
    auto m = evaluate_run(random_trace(rng, 5, 2, 2), opt, w, b);
    worst = std::max(worst, m.delta_ef);
    reports.push_back(std::move(m));
  }
  const auto agg = aggregate(reports, 1.0);
  CHECK(agg.delta_ef_plus <= worst + 1e-12);
  CHECK(agg.delta_ef_plus <= agg.mean_delta_ef + 1e-12);
}
