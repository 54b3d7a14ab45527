#include <doctest.h>

#include <cmath>
#include <random>

#include "fairdiv/guardrails.hpp"
#include "fairdiv/policies.hpp"

using namespace fairdiv;

namespace {

// One round whose count is 150 +- 10; delta is picked so Conf_0 = 15 and gamma = 0.1.
HorizonSpec gamma_tenth_horizon() {
  const double delta = std::exp(-1.125);
  return HorizonSpec(delta, {{Empirical{{{140, 0.5}, {160, 0.5}}}}});
}

MarketInstance single(double budget, double count, double weight = 1.0) {
  return MarketInstance(Vector::Constant(1, budget), {{"all", Vector::Constant(1, weight), count}});
}

HorizonSpec poisson_horizon(int rounds, const std::vector<double>& rates, double delta = 0.1) {
  std::vector<ArrivalModel> row;
  for (double r : rates) row.push_back(ClampedPoisson{r});
  return HorizonSpec(delta, std::vector<std::vector<ArrivalModel>>(rounds, row));
}

MarketInstance expected_instance(const HorizonSpec& h, const Matrix& weights, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> share(0.5, 1.5);
  const Vector expected = h.expected_totals();
  Vector budgets(weights.cols());
  for (auto& b : budgets) b = share(rng) * expected.sum() / static_cast<double>(weights.cols());
  std::vector<AgentType> types;
  for (int i = 0; i < weights.rows(); ++i)
    types.push_back({"t" + std::to_string(i), weights.row(i).transpose(), expected[i]});
  return MarketInstance(budgets, types);
}

}  // namespace

TEST_CASE("shrink factor") {
  CHECK(compute_c(0.2, 0.05, 1, 1, 1) == doctest::Approx(0.16));
  CHECK(compute_c(0.3, 0.1, 1, 1, 1) == doctest::Approx(0.23));
  CHECK(compute_c(0.3, 0.1, 2, 4, 3) == doctest::Approx(2.0 * 3.0 / 16.0 * 0.3 * 1.1 - 0.1));
  CHECK_THROWS_AS(compute_c(0.0, 0.0, 1, 1, 1), InfeasibleEnvyBudget);
  CHECK_THROWS_AS(compute_c(0.04, 0.05, 1, 1, 1), InfeasibleEnvyBudget);
  CHECK_THROWS_AS(compute_c(5.0, 0.05, 1, 1, 1), InfeasibleEnvyBudget);
  try {
    compute_c(0.01, 0.1, 1, 1, 1);
  } catch (const InfeasibleEnvyBudget& e) {
    CHECK(std::string(e.what()).find("below feasibility") != std::string::npos);
  }
  try {
    compute_c(10.0, 0.1, 1, 1, 1);
  } catch (const InfeasibleEnvyBudget& e) {
    CHECK(std::string(e.what()).find("too large") != std::string::npos);
  }
}

TEST_CASE("minimum feasible envy budget") {
  // gamma = 0.05 with unit weights and beta: Conf_0 = 5 on E[N] = 100.
  const double delta = std::exp(-12.5 / 16.0);
  const HorizonSpec h(delta, {{Empirical{{{96, 0.5}, {104, 0.5}}}}});
  CHECK(compute_gamma(h, Vector::Constant(1, 100.0)) == doctest::Approx(0.05));
  CHECK(min_feasible_envy_budget(h, single(100, 100)) == doctest::Approx(0.1));

  const HorizonSpec fixed(0.1, std::vector<std::vector<ArrivalModel>>(10, {Deterministic{3}}));
  CHECK(min_feasible_envy_budget(fixed, single(30, 30)) == 0.0);

  const HorizonSpec wide(0.1, std::vector<std::vector<ArrivalModel>>(100, {ClampedNormal{150, 2}}));
  const double conf0 = std::sqrt(800 * std::log(1000.0));
  CHECK(min_feasible_envy_budget(wide, single(150, 150)) == doctest::Approx(2 * conf0 / 150));
  CHECK(min_feasible_envy_budget(wide, single(150, 150)) == doctest::Approx(0.9912).epsilon(1e-4));
}

TEST_CASE("single-resource construction in closed form") {
  const auto g = build_guardrails(single(150, 150), gamma_tenth_horizon(), 0.3);
  CHECK(g.gamma == doctest::Approx(0.1));
  CHECK(g.c == doctest::Approx(0.23));
  CHECK(g.n_upper[0] == doctest::Approx(165.0));
  CHECK(g.n_lower[0] == doctest::Approx(115.5));
  CHECK(g.x_lower(0, 0) == doctest::Approx(150.0 / 165.0).epsilon(1e-8));
  CHECK(g.x_upper(0, 0) == doctest::Approx(150.0 / 115.5).epsilon(1e-8));
  CHECK(g.x_lower(0, 0) == doctest::Approx(0.9091).epsilon(1e-4));
  CHECK(g.x_upper(0, 0) == doctest::Approx(1.2987).epsilon(1e-4));
  const double gap = 150.0 * (165.0 - 115.5) / (165.0 * 115.5);
  CHECK(g.utility_gap[0] == doctest::Approx(gap).epsilon(1e-8));
  CHECK(g.utility_gap[0] == doctest::Approx(0.3896).epsilon(1e-4));
  CHECK(g.utility_gap_max() > g.envy_budget);
  CHECK(g.diagnostics.gap_within_relaxed_bound);
  CHECK(g.diagnostics.sandwich_guaranteed);
  CHECK(g.diagnostics.gamma_at_most_half);
}

TEST_CASE("vanishing envy budget collapses the guardrails") {
  const HorizonSpec fixed(0.1, std::vector<std::vector<ArrivalModel>>(10, {Deterministic{3}}));
  const auto m = single(30, 30);
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    const auto g = build_guardrails(m, fixed, eps);
    CHECK(g.gamma == 0.0);
    CHECK(g.n_upper[0] == doctest::Approx(30.0));
    CHECK(g.utility_gap[0] == doctest::Approx(eps * g.x_upper(0, 0)).epsilon(1e-6));
    CHECK(std::abs(g.x_upper(0, 0) - g.x_lower(0, 0)) <= 2 * eps);
  }
}

TEST_CASE("symmetric two-type guardrails are scaled copies") {
  const auto h = poisson_horizon(200, {2.0, 2.0});
  const Vector expected = h.expected_totals();
  const MarketInstance m(Vector::Constant(2, expected.sum() / 2),
                         {{"a", (Vector(2) << 1, 2).finished(), expected[0]},
                          {"b", (Vector(2) << 1, 2).finished(), expected[1]}});
  const double lt = 1.5 * min_feasible_envy_budget(h, m);
  const auto g = build_guardrails(m, h, lt);
  const double ratio = (1 + g.gamma) / (1 - g.c);
  CHECK((g.n_upper - ratio * g.n_lower).cwiseAbs().maxCoeff() <= 1e-9);
  const Vector u_up = g.x_upper.cwiseProduct(m.weight_matrix()).rowwise().sum();
  const Vector u_lo = g.x_lower.cwiseProduct(m.weight_matrix()).rowwise().sum();
  for (int i = 0; i < 2; ++i) CHECK(u_up[i] == doctest::Approx(u_lo[i] * ratio).epsilon(1e-6));
}

TEST_CASE("guardrail invariants on random instances") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> weight(0.5, 4.0), rate(1.0, 6.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int types = 1 + trial % 3, resources = 1 + trial % 4;
    std::vector<double> rates(types);
    for (auto& r : rates) r = rate(rng);
    const auto h = poisson_horizon(400, rates);
    Matrix w(types, resources);
    for (int i = 0; i < types; ++i)
      for (int k = 0; k < resources; ++k) w(i, k) = weight(rng);
    const auto m = expected_instance(h, w, rng);
    const double lt = 1.2 * min_feasible_envy_budget(h, m);
    Guardrails g;
    try {
      g = build_guardrails(m, h, lt);
    } catch (const InfeasibleEnvyBudget&) {
      continue;  // c >= 1 when the scale is large; nothing to check
    }
    CHECK(g.diagnostics.sandwich_guaranteed);
    CHECK((g.n_upper - (1 + g.gamma) * g.expected_counts).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((g.n_lower - (1 - g.c) * g.expected_counts).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(g.utility_gap.minCoeff() >= -1e-7);
    for (int i = 0; i < types; ++i) {
      const double bang = (w.row(i).transpose().array() / g.prices_at_n_lower.array()).maxCoeff();
      const double expected_gap = (1 - (1 - g.c) / (1 + g.gamma)) * bang;
      CHECK(g.utility_gap[i] == doctest::Approx(expected_gap).epsilon(1e-6));
      if (bang <= envy_scale(m)) CHECK(g.utility_gap[i] <= lt + 1e-7);
    }
  }
}

TEST_CASE("utility gap stays within the relaxed bound at unit average resource") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const auto h = poisson_horizon(300, {2.0});
    const Vector e = h.expected_totals();
    const auto m = single(e[0], e[0]);
    const double lt = (1.0 + trial) * 0.1 * min_feasible_envy_budget(h, m) + min_feasible_envy_budget(h, m);
    const auto g = build_guardrails(m, h, lt);
    CHECK(g.diagnostics.gap_within_relaxed_bound);
  }
}

TEST_CASE("sandwich holds on concentration runs") {
  const auto h = poisson_horizon(100, {1.5});
  const Vector e = h.expected_totals();
  const auto m = single(e[0], e[0]);
  const auto g = build_guardrails(m, h, 2.0 * std::pow(100.0, -1.0 / 3.0));
  int concentrated = 0, sandwiched = 0;
  const int runs = 400;
  for (int r = 0; r < runs; ++r) {
    Rng rng(derive_seed(3, r));
    const auto arrivals = h.sample_arrivals(rng);
    const double total = arrivals.sum();
    const auto opt = hindsight_optimal(arrivals, m);
    const bool inside = g.x_lower(0, 0) <= opt.allocation(0, 0) + 1e-9 && opt.allocation(0, 0) <= g.x_upper(0, 0) + 1e-9;
    sandwiched += inside;
    if (h.concentration_holds(arrivals)) {
      ++concentrated;
      CHECK(g.n_lower[0] <= total);
      CHECK(total <= g.n_upper[0]);
      CHECK(inside);
    }
  }
  CHECK(concentrated >= 0.9 * runs);
  CHECK(sandwiched >= 0.9 * runs);
}

TEST_CASE("multi-type sandwich on concentration runs") {
  const auto h = poisson_horizon(300, {1.5, 3.0, 4.5});
  Matrix w(3, 2);
  w << 1, 2, 2, 1, 1.5, 1.5;
  std::mt19937_64 rng(23);
  const auto m = expected_instance(h, w, rng);
  const auto g = build_guardrails(m, h, 1.1 * min_feasible_envy_budget(h, m));
  for (int r = 0; r < 100; ++r) {
    Rng arr_rng(derive_seed(4, r));
    const auto arrivals = h.sample_arrivals(arr_rng);
    if (!h.concentration_holds(arrivals)) continue;
    const auto opt = hindsight_optimal(arrivals, m);
    const Vector u = opt.utilities(m.with_counts(arrivals.colwise().sum().transpose().cast<double>()));
    const Vector u_up = g.x_upper.cwiseProduct(w).rowwise().sum();
    const Vector u_lo = g.x_lower.cwiseProduct(w).rowwise().sum();
    CHECK((u_lo - u).maxCoeff() <= 1e-6);
    CHECK((u - u_up).maxCoeff() <= 1e-6);
  }
}

TEST_CASE("mismatched inputs") {
  const auto h = poisson_horizon(10, {1.5, 1.5});
  CHECK_THROWS_AS(build_guardrails(single(10, 10), h, 0.5), ValidationError);
  CHECK_THROWS_AS(compute_gamma(h, Vector::Ones(3)), ValidationError);
}
