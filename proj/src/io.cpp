#include "fairdiv/io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "fairdiv/errors.hpp"
#include "fairdiv/guardrails.hpp"

namespace fairdiv {

using nlohmann::json;

namespace {

Vector to_vector(const json& arr, const char* what) {
  if (!arr.is_array() || arr.empty()) throw ValidationError(std::string(what) + " must be a non-empty array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

json from_vector(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json from_matrix(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(from_vector(m.row(i).transpose()));
  return rows;
}

template <class F>
auto with_context(const char* what, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

ArrivalModel parse_arrival_model(const json& spec) {
  return with_context("arrival model", [&]() -> ArrivalModel {
    const auto kind = spec.at("kind").get<std::string>();
    ArrivalModel model;
    if (kind == "deterministic") {
      model = Deterministic{spec.at("n").get<int>()};
    } else if (kind == "poisson") {
      model = ClampedPoisson{spec.at("lambda").get<double>()};
    } else if (kind == "normal") {
      model = ClampedNormal{spec.at("mu").get<double>(), spec.at("sigma").get<double>()};
    } else if (kind == "empirical") {
      Empirical e;
      for (const auto& [count, prob] : spec.at("histogram").items()) {
        e.histogram[std::stoi(count)] = prob.get<double>();
      }
      model = e;
    } else {
      throw ValidationError("unknown arrival model kind '" + kind +
                            "' (expected deterministic, poisson, normal or empirical)");
    }
    validate(model);
    return model;
  });
}

json to_json(const ArrivalModel& model) {
  if (auto m = std::get_if<Deterministic>(&model)) return {{"kind", "deterministic"}, {"n", m->n}};
  if (auto m = std::get_if<ClampedPoisson>(&model)) return {{"kind", "poisson"}, {"lambda", m->lambda}};
  if (auto m = std::get_if<ClampedNormal>(&model))
    return {{"kind", "normal"}, {"mu", m->mu}, {"sigma", m->sigma}};
  const auto& e = std::get<Empirical>(model);
  json hist = json::object();
  for (const auto& [count, prob] : e.histogram) hist[std::to_string(count)] = prob;
  return {{"kind", "empirical"}, {"histogram", hist}};
}

MarketInstance parse_instance(const json& doc) {
  return with_context("instance", [&] {
    std::vector<AgentType> types;
    for (const auto& t : doc.at("types")) {
      types.push_back({t.at("id").get<std::string>(), to_vector(t.at("weights"), "weights"),
                       t.at("count").get<double>()});
    }
    return MarketInstance(to_vector(doc.at("budgets"), "budgets"), std::move(types));
  });
}

json to_json(const MarketInstance& instance, const EGSolution& solution) {
  const Vector u = solution.utilities(instance);
  json types = json::array();
  for (int i = 0; i < instance.num_types(); ++i) {
    types.push_back({{"id", instance.types()[i].id},
                     {"count", instance.count(i)},
                     {"allocation", from_vector(solution.allocation.row(i).transpose())},
                     {"utility", u[i]}});
  }
  return {{"prices", from_vector(solution.prices)},
          {"types", types},
          {"kkt_residual", solution.kkt_residual},
          {"iterations", solution.iterations}};
}

HorizonFile parse_horizon(const json& doc) {
  return with_context("horizon file", [&] {
    const int rounds = doc.at("T").get<int>();
    if (rounds < 1) throw ValidationError("T must be positive");
    const double delta = doc.value("delta", 0.1);
    const auto& type_docs = doc.at("types");
    if (!type_docs.is_array() || type_docs.empty()) throw ValidationError("horizon needs types");

    std::vector<std::vector<ArrivalModel>> models(rounds);
    std::vector<std::pair<std::string, Vector>> weights;
    for (const auto& t : type_docs) {
      weights.emplace_back(t.at("id").get<std::string>(), to_vector(t.at("weights"), "weights"));
      if (t.contains("models")) {
        const auto& list = t.at("models");
        if (!list.is_array() || static_cast<int>(list.size()) != rounds)
          throw ValidationError("type '" + weights.back().first + "' must list exactly T models");
        for (int r = 0; r < rounds; ++r) models[r].push_back(parse_arrival_model(list[r]));
      } else {
        const ArrivalModel m = parse_arrival_model(t.at("model"));
        for (auto& row : models) row.push_back(m);
      }
    }
    HorizonSpec horizon(delta, std::move(models));
    const Vector expected = horizon.expected_totals();
    const auto resources = weights.front().second.size();
    Vector budgets = doc.contains("budgets") ? to_vector(doc.at("budgets"), "budgets")
                                             : Vector::Constant(resources, expected.sum() / resources);
    std::vector<AgentType> types;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      types.push_back({weights[i].first, weights[i].second, expected[static_cast<Eigen::Index>(i)]});
    }
    return HorizonFile{std::move(horizon), MarketInstance(std::move(budgets), std::move(types))};
  });
}

ExperimentConfig parse_experiment_config(const json& doc, const std::filesystem::path& relative_to) {
  return with_context("experiment config", [&] {
    std::vector<LocationParams> locations;
    if (doc.contains("locations")) {
      std::filesystem::path p = doc.at("locations").get<std::string>();
      if (p.is_relative() && !relative_to.empty()) p = relative_to / p;
      locations = load_locations(p);
    }
    std::optional<LocationParams> base;
    if (doc.contains("base")) base = LocationParams{doc["base"].at("mu"), doc["base"].at("sigma")};

    ExperimentConfig config;
    const auto& setting = doc.at("setting");
    if (setting.is_string()) {
      config = builtin_experiment(setting.get<std::string>(), locations, base);
    } else {
      Setting& s = config.setting;
      s.name = setting.value("name", std::string("custom"));
      std::vector<Vector> rows;
      for (const auto& t : setting.at("types")) {
        s.type_ids.push_back(t.at("id").get<std::string>());
        rows.push_back(to_vector(t.at("weights"), "weights"));
        s.per_type.push_back(parse_arrival_model(t.at("model")));
      }
      s.weights = Matrix(static_cast<Eigen::Index>(rows.size()), rows.front().size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw ValidationError("weights differ in length");
        s.weights.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
      }
      const auto resources = s.weights.cols();
      s.budget_proportions = setting.contains("budget_proportions")
                                 ? to_vector(setting.at("budget_proportions"), "budget_proportions")
                                 : Vector::Constant(resources, 1.0 / static_cast<double>(resources));
      config.horizons = {100, 200, 400, 800, 1600, 3200};
      config.policies = {{PolicyKind::GuardedHope, 2.0, -1.0 / 3.0},
                         {PolicyKind::FixedThreshold, 2.0, -1.0 / 3.0}};
    }
    if (doc.contains("T")) config.horizons = doc.at("T").get<std::vector<int>>();
    if (doc.contains("policies")) {
      config.policies.clear();
      for (const auto& p : doc.at("policies")) {
        config.policies.push_back({parse_policy(p.at("policy").get<std::string>()),
                                   p.value("coefficient", 2.0), p.value("exponent", -1.0 / 3.0)});
      }
    }
    config.delta = doc.value("delta", config.delta);
    config.runs = doc.value("runs", config.runs);
    config.base_seed = doc.value("base_seed", config.base_seed);
    if (doc.contains("output")) config.output_dir = doc.at("output").get<std::string>();
    if (doc.contains("tolerance")) config.solver.tolerance = doc.at("tolerance").get<double>();
    config.validate();
    return config;
  });
}

json to_json(const Guardrails& g) {
  const auto& d = g.diagnostics;
  return {{"L_T", g.envy_budget},
          {"gamma", g.gamma},
          {"c", g.c},
          {"expected_counts", from_vector(g.expected_counts)},
          {"n_upper", from_vector(g.n_upper)},
          {"n_lower", from_vector(g.n_lower)},
          {"x_upper", from_matrix(g.x_upper)},
          {"x_lower", from_matrix(g.x_lower)},
          {"utility_gap", from_vector(g.utility_gap)},
          {"diagnostics",
           {{"gamma_at_most_half", d.gamma_at_most_half},
            {"meets_sufficient_envy_budget", d.meets_sufficient_envy_budget},
            {"sandwich_guaranteed", d.sandwich_guaranteed},
            {"gap_within_relaxed_bound", d.gap_within_relaxed_bound},
            {"allocation_gap", d.allocation_gap},
            {"allocation_gap_lower_bound", d.allocation_gap_lower_bound},
            {"allocation_gap_upper_bound", d.allocation_gap_upper_bound},
            {"allocation_gap_above_lower", d.allocation_gap_above_lower},
            {"allocation_gap_below_upper", d.allocation_gap_below_upper}}}};
}

void write_trace_csv(std::ostream& out, const AllocationTrace& trace, const std::vector<std::string>& type_ids) {
  out << "t,theta,k,arrivals,allocation,budget_before,branch\n";
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  for (int t = 0; t < trace.rounds(); ++t) {
    for (int i = 0; i < trace.num_types(); ++i) {
      for (int k = 0; k < trace.num_resources(); ++k) {
        const std::string id = i < static_cast<int>(type_ids.size()) ? type_ids[i] : std::to_string(i);
        out << t + 1 << ',' << id << ',' << k << ',' << trace.arrivals(t, i) << ','
            << num(trace.allocations[t](i, k)) << ',' << num(trace.budget_path(t, k)) << ','
            << to_string(trace.branches[t][k]) << '\n';
      }
    }
  }
}

}  // namespace fairdiv
