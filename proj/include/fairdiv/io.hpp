#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include <json.hpp>

#include "fairdiv/arrivals.hpp"
#include "fairdiv/harness.hpp"
#include "fairdiv/market.hpp"
#include "fairdiv/policies.hpp"

namespace fairdiv {

nlohmann::json read_json(const std::filesystem::path& path);

/// {"kind": "deterministic", "n": 3} | {"kind": "poisson", "lambda": 1.5}
/// | {"kind": "normal", "mu": 5, "sigma": 2} | {"kind": "empirical", "histogram": {"1": 0.5, "3": 0.5}}
ArrivalModel parse_arrival_model(const nlohmann::json& spec);
nlohmann::json to_json(const ArrivalModel& model);

/// {"budgets": [...], "types": [{"id": "a", "weights": [...], "count": 2}, ...]}
MarketInstance parse_instance(const nlohmann::json& doc);

nlohmann::json to_json(const MarketInstance& instance, const EGSolution& solution);

/// A horizon file: {"T": 50, "delta": 0.1, "budgets": [...]?,
///  "types": [{"id", "weights", "model": {...}} or {"id", "weights", "models": [T specs]}]}.
/// Without "budgets" the resources get equal shares of the expected arrivals.
struct HorizonFile {
  HorizonSpec horizon;
  MarketInstance expected;
};

HorizonFile parse_horizon(const nlohmann::json& doc);

/// Experiment config file mirroring ExperimentConfig. "setting" is a built-in
/// name or an inline object {"name", "types": [{"id", "weights", "model"}],
/// "budget_proportions"?}.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                         const std::filesystem::path& relative_to = {});

nlohmann::json to_json(const Guardrails& guardrails);

/// Columns t, theta, k, arrivals, allocation, budget_before, branch; t is 1-based.
void write_trace_csv(std::ostream& out, const AllocationTrace& trace,
                     const std::vector<std::string>& type_ids);

}  // namespace fairdiv
