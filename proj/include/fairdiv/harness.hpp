#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fairdiv/arrivals.hpp"
#include "fairdiv/market.hpp"
#include "fairdiv/metrics.hpp"

namespace fairdiv {

/// Mean and standard deviation of the head count at one historical location.
struct LocationParams {
  double mu = 0.0;
  double sigma = 1.0;
};

/// How the per-round arrival laws of a setting are produced for a horizon T.
enum class ArrivalSource {
  PerType,       // the same model for a type in every round
  LocationPool,  // round t draws a location from the pool: Normal(D mu_t, D sigma_t)
  PooledBase,    // one Normal(D mu, D sigma) for all rounds, moments of T sampled locations
};

struct Setting {
  std::string name;
  std::vector<std::string> type_ids;
  Matrix weights;            // types x K
  Vector budget_proportions;  // sums to 1
  ArrivalSource source = ArrivalSource::PerType;
  std::vector<ArrivalModel> per_type;    // PerType
  std::vector<LocationParams> locations;  // LocationPool / PooledBase
  Vector type_fractions;                  // D_theta for the normal sources
  std::optional<LocationParams> base;     // PooledBase override of the sampled moments

  int num_types() const { return static_cast<int>(type_ids.size()); }
  int num_resources() const { return static_cast<int>(weights.cols()); }
};

enum class PolicyKind { GuardedHope, FixedThreshold };

const char* to_string(PolicyKind kind);
PolicyKind parse_policy(const std::string& name);

/// A policy plus its envy budget rule L_T = coefficient * scale * T^exponent,
/// where scale is the instance's envy_scale (1 for unit weights and budgets).
struct PolicySpec {
  PolicyKind kind = PolicyKind::GuardedHope;
  double coefficient = 2.0;
  double exponent = -1.0 / 3.0;

  std::string rule() const;
};

struct ExperimentConfig {
  Setting setting;
  std::vector<int> horizons;
  std::vector<PolicySpec> policies;
  double delta = 0.1;
  int runs = 200;
  std::uint64_t base_seed = 0;
  std::filesystem::path output_dir;
  SolverOptions solver;

  /// Throws ValidationError on empty lists, bad exponents, or bad delta.
  void validate() const;
};

inline const std::vector<std::string> kBuiltinSettings = {"single-synthetic", "single-fbst-style",
                                                          "multi-synthetic", "multi-fbst-style"};

/// Location pool for the fbst-style settings: CSV with `mu,sigma` rows.
std::vector<LocationParams> load_locations(const std::filesystem::path& path);

/// Built-in settings. The fbst-style ones need a location pool; the
/// multi one alternatively accepts fixed base moments.
ExperimentConfig builtin_experiment(const std::string& name,
                                    const std::vector<LocationParams>& locations = {},
                                    const std::optional<LocationParams>& base = std::nullopt);

/// Per-round arrival laws of a setting at horizon T; `seed` picks the sampled locations.
HorizonSpec make_horizon(const Setting& setting, int rounds, double delta, std::uint64_t seed);

/// Budgets proportional_k * sum of expected arrivals, as a market at the expected totals.
MarketInstance expected_market(const Setting& setting, const HorizonSpec& horizon);

/// L_T for a policy at horizon T on the expected market.
double envy_budget_for(const PolicySpec& policy, const MarketInstance& expected, int rounds);

struct AggregateRow {
  AggregateMetrics metrics;
  bool feasible = true;
  std::string note;
};

struct ExperimentResult {
  std::vector<RunMetrics> runs;
  std::vector<AggregateRow> aggregates;
};

struct RunOptions {
  int parallel = 1;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

void write_runs_csv(std::ostream& out, const std::vector<RunMetrics>& runs);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// Run and write `runs.csv` and `aggregate.csv` into the config's output directory.
ExperimentResult run_experiment_to_disk(const ExperimentConfig& config, const RunOptions& options = {});

/// One parsed line of an aggregate CSV.
struct AggregateRecord {
  std::string setting;
  std::string policy;
  std::string rule;
  int rounds = 0;
  int runs = 0;
  double mean_delta_ef = 0.0;
  double mean_delta_eff = 0.0;
  double delta_ef_plus = 0.0;
  double mean_envy = 0.0;
  double mean_delta_prop = 0.0;
  double envy_violation_freq = 0.0;
  double envy_budget = 0.0;
  bool feasible = true;

  /// Metric by name: waste, delta_ef, delta_ef_plus, envy, delta_prop.
  double metric(const std::string& name) const;
};

std::vector<AggregateRecord> read_aggregate_csv(std::istream& in);

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
  int dropped = 0;
};

/// Least squares of log(metric) on log(T) over the feasible rows of one
/// policy (and rule, when given). Nonpositive values are dropped with a
/// warning on `warnings`; fewer than three distinct T values is an error.
ScalingFit scaling_fit(const std::vector<AggregateRecord>& rows, const std::string& metric,
                       const std::string& policy, const std::string& rule = {},
                       std::ostream* warnings = nullptr);

/// Ordinary least squares y = slope * x + intercept.
ScalingFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace fairdiv
