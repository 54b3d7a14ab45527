#include "fairdiv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fairdiv/errors.hpp"
#include "fairdiv/guardrails.hpp"
#include "fairdiv/policies.hpp"

namespace fairdiv {

namespace {

constexpr std::uint64_t kLocationStream = 0x4c4f434154494f4eULL;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string format_exponent(double e) {
  for (int d = 1; d <= 6; ++d) {
    const double scaled = e * d;
    if (std::abs(scaled - std::round(scaled)) < 1e-12) {
      const long num = std::lround(scaled);
      return d == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(d);
    }
  }
  return format_number(e);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

Vector uniform_proportions(int resources) { return Vector::Constant(resources, 1.0 / resources); }

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

std::vector<LocationParams> sample_locations(const std::vector<LocationParams>& pool, int count,
                                             std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<LocationParams> chosen;
  chosen.reserve(count);
  for (int i = 0; i < count; ++i) chosen.push_back(pool[pick(rng)]);
  return chosen;
}

// Mean and total variance of the head count at a location drawn from `sampled`.
LocationParams pooled_moments(const std::vector<LocationParams>& sampled) {
  double mean_mu = 0.0;
  double mean_var = 0.0;
  for (const auto& loc : sampled) {
    mean_mu += loc.mu;
    mean_var += loc.sigma * loc.sigma;
  }
  mean_mu /= sampled.size();
  mean_var /= sampled.size();
  double spread = 0.0;
  for (const auto& loc : sampled) spread += (loc.mu - mean_mu) * (loc.mu - mean_mu);
  spread /= sampled.size();
  return {mean_mu, std::sqrt(mean_var + spread)};
}

}  // namespace

const char* to_string(PolicyKind kind) {
  return kind == PolicyKind::GuardedHope ? "guarded-hope" : "fixed-threshold";
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "guarded-hope") return PolicyKind::GuardedHope;
  if (name == "fixed-threshold") return PolicyKind::FixedThreshold;
  throw ValidationError("unknown policy '" + name + "' (expected guarded-hope or fixed-threshold)");
}

std::string PolicySpec::rule() const {
  return format_number(coefficient) + "*T^(" + format_exponent(exponent) + ")";
}

void ExperimentConfig::validate() const {
  if (horizons.empty()) throw ValidationError("experiment needs at least one horizon T");
  for (int t : horizons)
    if (t < 1) throw ValidationError("horizons must be positive");
  if (policies.empty()) throw ValidationError("experiment needs at least one policy");
  for (const auto& p : policies) {
    if (!(p.coefficient > 0.0)) throw ValidationError("envy budget coefficient must be positive");
    if (p.kind == PolicyKind::GuardedHope && !(p.exponent >= -0.5 - 1e-12 && p.exponent < 0.0)) {
      throw ValidationError("guarded-hope envy budget exponent must lie in [-1/2, 0), got " +
                            format_number(p.exponent));
    }
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (runs < 1) throw ValidationError("runs must be at least 1");
  if (setting.num_types() < 1 || setting.weights.rows() != setting.num_types())
    throw ValidationError("setting weights must have one row per type");
  if (setting.budget_proportions.size() != setting.num_resources())
    throw ValidationError("setting needs one budget proportion per resource");
  if (std::abs(setting.budget_proportions.sum() - 1.0) > 1e-9 ||
      (setting.budget_proportions.array() <= 0.0).any())
    throw ValidationError("budget proportions must be positive and sum to 1");
  switch (setting.source) {
    case ArrivalSource::PerType:
      if (static_cast<int>(setting.per_type.size()) != setting.num_types())
        throw ValidationError("setting needs one arrival model per type");
      break;
    case ArrivalSource::LocationPool:
    case ArrivalSource::PooledBase:
      if (setting.type_fractions.size() != setting.num_types())
        throw ValidationError("setting needs one population fraction per type");
      if (setting.locations.empty() && !(setting.source == ArrivalSource::PooledBase && setting.base))
        throw ValidationError("setting '" + setting.name +
                              "' needs a location file (CSV rows `mu,sigma`); pass --locations <file>");
      break;
  }
}

std::vector<LocationParams> load_locations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open location file " + path.string());
  std::vector<LocationParams> pool;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < 2) throw ValidationError("location rows need `mu,sigma`: " + line);
    try {
      pool.push_back({std::stod(fields[0]), std::stod(fields[1])});
    } catch (const std::invalid_argument&) {
      if (pool.empty()) continue;  // header
      throw ValidationError("malformed location row: " + line);
    }
    if (!(pool.back().sigma > 0.0)) throw ValidationError("location sigma must be positive: " + line);
  }
  if (pool.empty()) throw ValidationError("location file " + path.string() + " has no rows");
  return pool;
}

ExperimentConfig builtin_experiment(const std::string& name, const std::vector<LocationParams>& locations,
                                    const std::optional<LocationParams>& base) {
  ExperimentConfig config;
  config.horizons = {100, 200, 400, 800, 1600, 3200};
  config.policies = {{PolicyKind::GuardedHope, 2.0, -1.0 / 3.0},
                     {PolicyKind::GuardedHope, 2.0, -0.5},
                     {PolicyKind::FixedThreshold, 2.0, -1.0 / 3.0}};
  Setting& s = config.setting;
  s.name = name;

  if (name == "single-synthetic") {
    s.type_ids = {"all"};
    s.weights = Matrix::Constant(1, 1, 1.0);
    s.budget_proportions = uniform_proportions(1);
    s.per_type = {ClampedPoisson{1.5}};
  } else if (name == "multi-synthetic") {
    s.type_ids = {"theta1", "theta2", "theta3", "theta4", "theta5"};
    s.weights = rows_to_matrix({{1, 2, 3}, {1, 3, 2}, {4, 1, 5}, {1, 2, 0.5}, {3, 7, 5}});
    s.budget_proportions = uniform_proportions(3);
    s.per_type = {ClampedPoisson{1.5}, ClampedPoisson{2.5}, ClampedPoisson{3.5}, ClampedPoisson{4.5},
                  ClampedPoisson{5.5}};
  } else if (name == "single-fbst-style") {
    s.type_ids = {"all"};
    s.weights = Matrix::Constant(1, 1, 1.0);
    s.budget_proportions = uniform_proportions(1);
    s.source = ArrivalSource::LocationPool;
    s.type_fractions = Vector::Constant(1, 1.0);
    s.locations = locations;
  } else if (name == "multi-fbst-style") {
    // Resources: cereal, pasta, prepared meals, rice, meat.
    s.type_ids = {"carnivore", "vegetarian", "prepared-only"};
    s.weights = rows_to_matrix(
        {{3.9, 3, 2.8, 2.7, 1.9}, {3.9, 3, 0.1, 2.7, 0.1}, {3.9, 3, 2.8, 2.7, 0.1}});
    s.budget_proportions = uniform_proportions(5);
    s.source = ArrivalSource::PooledBase;
    s.type_fractions = (Vector(3) << 0.25, 0.3, 0.45).finished();
    s.locations = locations;
    s.base = base;
  } else {
    std::string known;
    for (const auto& n : kBuiltinSettings) known += " " + n;
    throw ValidationError("unknown experiment '" + name + "'; built-in settings:" + known);
  }
  config.validate();
  return config;
}

HorizonSpec make_horizon(const Setting& setting, int rounds, double delta, std::uint64_t seed) {
  if (rounds < 1) throw ValidationError("horizon needs at least one round");
  std::vector<std::vector<ArrivalModel>> models(rounds);
  switch (setting.source) {
    case ArrivalSource::PerType:
      for (auto& row : models) row = setting.per_type;
      break;
    case ArrivalSource::LocationPool: {
      if (setting.locations.empty()) throw ValidationError("location pool is empty");
      const auto chosen = sample_locations(setting.locations, rounds, seed);
      for (int t = 0; t < rounds; ++t) {
        for (int i = 0; i < setting.num_types(); ++i) {
          const double d = setting.type_fractions[i];
          models[t].push_back(ClampedNormal{d * chosen[t].mu, d * chosen[t].sigma});
        }
      }
      break;
    }
    case ArrivalSource::PooledBase: {
      LocationParams base;
      if (setting.base) {
        base = *setting.base;
      } else {
        if (setting.locations.empty()) throw ValidationError("location pool is empty");
        base = pooled_moments(sample_locations(setting.locations, rounds, seed));
      }
      std::vector<ArrivalModel> row;
      for (int i = 0; i < setting.num_types(); ++i) {
        const double d = setting.type_fractions[i];
        row.push_back(ClampedNormal{d * base.mu, d * base.sigma});
      }
      for (auto& r : models) r = row;
      break;
    }
  }
  return HorizonSpec(delta, std::move(models));
}

MarketInstance expected_market(const Setting& setting, const HorizonSpec& horizon) {
  const Vector expected = horizon.expected_totals();
  std::vector<AgentType> types;
  for (int i = 0; i < setting.num_types(); ++i) {
    types.push_back({setting.type_ids[i], setting.weights.row(i).transpose(), expected[i]});
  }
  return MarketInstance(setting.budget_proportions * expected.sum(), std::move(types));
}

double envy_budget_for(const PolicySpec& policy, const MarketInstance& expected, int rounds) {
  return policy.coefficient * envy_scale(expected) * std::pow(static_cast<double>(rounds), policy.exponent);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  ExperimentResult result;
  const Setting& setting = config.setting;

  for (int rounds : config.horizons) {
    const HorizonSpec horizon =
        make_horizon(setting, rounds, config.delta, derive_seed(config.base_seed ^ kLocationStream, rounds));
    const MarketInstance expected = expected_market(setting, horizon);
    const Vector budgets = expected.budgets();
    const Matrix weights = expected.weight_matrix();

    struct Cell {
      PolicySpec spec;
      double envy_budget = 0.0;
      std::optional<Guardrails> guardrails;
      std::string note;
      std::vector<RunMetrics> runs;
    };
    std::vector<Cell> cells;
    for (const auto& spec : config.policies) {
      Cell cell{spec, envy_budget_for(spec, expected, rounds), std::nullopt, {}, {}};
      try {
        cell.guardrails = build_guardrails(expected, horizon, cell.envy_budget, config.solver);
      } catch (const InfeasibleEnvyBudget& e) {
        cell.note = e.what();
      }
      cell.runs.resize(config.runs);
      cells.push_back(std::move(cell));
    }

    const std::uint64_t horizon_seed = derive_seed(config.base_seed, static_cast<std::uint64_t>(rounds));
    auto run_one = [&](int run) {
      const std::uint64_t seed = derive_seed(horizon_seed, static_cast<std::uint64_t>(run));
      Rng rng(seed);
      const ArrivalMatrix arrivals = horizon.sample_arrivals(rng);
      const bool concentrated = horizon.concentration_holds(arrivals);
      const EGSolution opt = hindsight_optimal(arrivals, expected, config.solver);
      for (auto& cell : cells) {
        if (!cell.guardrails) continue;
        AllocationTrace trace = cell.spec.kind == PolicyKind::GuardedHope
                                    ? guarded_hope(*cell.guardrails, horizon, budgets, arrivals)
                                    : fixed_threshold(*cell.guardrails, horizon, budgets, arrivals);
        trace.seed = seed;
        RunMetrics m = evaluate_run(trace, opt.allocation, weights, budgets);
        m.setting = setting.name;
        m.envy_budget_rule = cell.spec.rule();
        m.envy_budget = cell.envy_budget;
        m.run = run;
        m.concentration = concentrated;
        cell.runs[run] = std::move(m);
      }
    };

    const int workers = std::max(1, std::min(options.parallel, config.runs));
    if (workers == 1) {
      for (int r = 0; r < config.runs; ++r) run_one(r);
    } else {
      std::atomic<int> next{0};
      std::exception_ptr failure;
      std::mutex failure_mutex;
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (int r = next++; r < config.runs; r = next++) {
            try {
              run_one(r);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      }
      for (auto& t : pool) t.join();
      if (failure) std::rethrow_exception(failure);
    }

    for (auto& cell : cells) {
      AggregateRow row;
      if (cell.guardrails) {
        row.metrics = aggregate(cell.runs, cell.guardrails->utility_gap_max());
        for (auto& m : cell.runs) result.runs.push_back(std::move(m));
      } else {
        row.feasible = false;
        row.note = cell.note;
        auto& m = row.metrics;
        m.setting = setting.name;
        m.policy = to_string(cell.spec.kind);
        m.envy_budget_rule = cell.spec.rule();
        m.rounds = rounds;
        m.envy_budget = cell.envy_budget;
        m.runs = 0;
        m.mean_delta_ef = m.mean_delta_efficiency = m.mean_envy = m.mean_delta_prop = m.delta_ef_plus =
            m.envy_violation_frequency = m.concentration_frequency = std::nan("");
      }
      result.aggregates.push_back(std::move(row));
    }
  }
  return result;
}

void write_runs_csv(std::ostream& out, const std::vector<RunMetrics>& runs) {
  out << "setting,policy,T,L_T_rule,L_T,run,seed,delta_ef,delta_eff,envy,delta_prop,concentration,"
         "fallbacks\n";
  for (const auto& r : runs) {
    out << r.setting << ',' << r.policy << ',' << r.rounds << ',' << r.envy_budget_rule << ','
        << format_number(r.envy_budget) << ',' << r.run << ',' << r.seed << ',' << format_number(r.delta_ef)
        << ',' << format_number(r.delta_efficiency) << ',' << format_number(r.envy) << ','
        << format_number(r.delta_prop) << ',' << (r.concentration ? 1 : 0) << ',' << r.fallback_count
        << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "setting,policy,T,L_T_rule,runs,mean_delta_ef,mean_delta_eff,delta_ef_plus,mean_envy,"
         "mean_delta_prop,envy_violation_freq,L_T,status\n";
  for (const auto& row : rows) {
    const auto& m = row.metrics;
    out << m.setting << ',' << m.policy << ',' << m.rounds << ',' << m.envy_budget_rule << ',' << m.runs
        << ',' << format_number(m.mean_delta_ef) << ',' << format_number(m.mean_delta_efficiency) << ','
        << format_number(m.delta_ef_plus) << ',' << format_number(m.mean_envy) << ','
        << format_number(m.mean_delta_prop) << ',' << format_number(m.envy_violation_frequency) << ','
        << format_number(m.envy_budget) << ',' << (row.feasible ? "ok" : "infeasible") << '\n';
  }
}

ExperimentResult run_experiment_to_disk(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentResult result = run_experiment(config, options);
  std::filesystem::create_directories(config.output_dir);
  {
    std::ofstream out(config.output_dir / "runs.csv");
    if (!out) throw ValidationError("cannot write " + (config.output_dir / "runs.csv").string());
    write_runs_csv(out, result.runs);
  }
  {
    std::ofstream out(config.output_dir / "aggregate.csv");
    if (!out) throw ValidationError("cannot write " + (config.output_dir / "aggregate.csv").string());
    write_aggregate_csv(out, result.aggregates);
  }
  return result;
}

double AggregateRecord::metric(const std::string& name) const {
  if (name == "waste" || name == "delta_eff" || name == "efficiency") return mean_delta_eff;
  if (name == "delta_ef" || name == "envy_cf") return mean_delta_ef;
  if (name == "delta_ef_plus") return delta_ef_plus;
  if (name == "envy") return mean_envy;
  if (name == "delta_prop" || name == "prop") return mean_delta_prop;
  throw ValidationError("unknown metric '" + name +
                        "' (expected waste, delta_ef, delta_ef_plus, envy or delta_prop)");
}

std::vector<AggregateRecord> read_aggregate_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("aggregate CSV is empty");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const char* required : {"setting", "policy", "T", "L_T_rule", "runs", "mean_delta_ef",
                               "mean_delta_eff", "delta_ef_plus", "mean_envy", "mean_delta_prop",
                               "envy_violation_freq"}) {
    if (!column.count(required))
      throw ValidationError(std::string("aggregate CSV lacks column '") + required + "'");
  }
  std::vector<AggregateRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < header.size()) throw ValidationError("short aggregate CSV row: " + line);
    auto num = [&](const char* key) { return std::stod(f[column.at(key)]); };
    AggregateRecord r;
    r.setting = f[column.at("setting")];
    r.policy = f[column.at("policy")];
    r.rule = f[column.at("L_T_rule")];
    r.rounds = std::stoi(f[column.at("T")]);
    r.runs = std::stoi(f[column.at("runs")]);
    r.mean_delta_ef = num("mean_delta_ef");
    r.mean_delta_eff = num("mean_delta_eff");
    r.delta_ef_plus = num("delta_ef_plus");
    r.mean_envy = num("mean_envy");
    r.mean_delta_prop = num("mean_delta_prop");
    r.envy_violation_freq = num("envy_violation_freq");
    if (column.count("L_T")) r.envy_budget = num("L_T");
    if (column.count("status")) r.feasible = f[column.at("status")] == "ok";
    rows.push_back(r);
  }
  return rows;
}

ScalingFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("line fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("line fit needs distinct x values");
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.points = static_cast<int>(x.size());
  return fit;
}

ScalingFit scaling_fit(const std::vector<AggregateRecord>& rows, const std::string& metric,
                       const std::string& policy, const std::string& rule, std::ostream* warnings) {
  std::set<std::string> rules;
  for (const auto& r : rows) {
    if (r.policy == policy && r.feasible && (rule.empty() || r.rule == rule)) rules.insert(r.rule);
  }
  if (rules.size() > 1) {
    std::string listed;
    for (const auto& r : rules) listed += " " + r;
    throw ValidationError("policy '" + policy + "' has several envy budget rules; pick one of:" + listed);
  }
  std::vector<double> x, y;
  std::set<int> distinct;
  int dropped = 0;
  for (const auto& r : rows) {
    if (r.policy != policy || !r.feasible || (!rule.empty() && r.rule != rule)) continue;
    const double value = r.metric(metric);
    if (!(value > 0.0)) {
      ++dropped;
      if (warnings) *warnings << "warning: dropping T=" << r.rounds << " (" << metric << " = " << value
                              << " is not positive)\n";
      continue;
    }
    x.push_back(std::log(static_cast<double>(r.rounds)));
    y.push_back(std::log(value));
    distinct.insert(r.rounds);
  }
  if (distinct.size() < 3) {
    throw ValidationError("scaling fit needs at least three distinct T values with positive " + metric +
                          " for policy '" + policy + "'");
  }
  ScalingFit fit = fit_line(x, y);
  fit.dropped = dropped;
  return fit;
}

}  // namespace fairdiv
