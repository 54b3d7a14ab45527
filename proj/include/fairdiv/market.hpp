#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace fairdiv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;  // rows: types, cols: resources

/// One class of individuals: a linear utility over resources and a (possibly
/// fractional) head count that doubles as the type's money in the Fisher market.
struct AgentType {
  std::string id;
  Vector weights;
  double count = 0.0;
};

/// Budgets of K divisible resources shared among a list of agent types.
class MarketInstance {
 public:
  MarketInstance(Vector budgets, std::vector<AgentType> types);

  int num_resources() const { return static_cast<int>(budgets_.size()); }
  int num_types() const { return static_cast<int>(types_.size()); }

  const Vector& budgets() const { return budgets_; }
  const std::vector<AgentType>& types() const { return types_; }
  const Vector& weights(int type) const { return types_[type].weights; }
  double count(int type) const { return types_[type].count; }

  /// Weight matrix, one row per type.
  Matrix weight_matrix() const;
  Vector counts() const;
  double total_count() const { return counts().sum(); }

  /// Average resource per individual, B / sum of counts.
  Vector beta_avg() const;
  double weight_min() const;
  double weight_max() const;

  /// Same weights and budgets with the counts replaced.
  MarketInstance with_counts(const Vector& counts) const;

 private:
  Vector budgets_;
  std::vector<AgentType> types_;
};

/// Equilibrium of the linear Fisher market, equivalently the optimum of the
/// Eisenberg-Gale program. Allocations are per individual of each type.
struct EGSolution {
  Matrix allocation;
  Vector prices;
  double kkt_residual = 0.0;
  long iterations = 0;

  /// Per-individual utility of each type, recomputed from the allocation.
  Vector utilities(const MarketInstance& instance) const;
};

struct SolverOptions {
  double tolerance = 1e-8;
  long max_iterations = 200'000;
};

/// Proportional-response dynamics on per-type money splits, stopped when the
/// KKT certificate drops to the tolerance. Throws ConvergenceError otherwise.
EGSolution solve_eg(const MarketInstance& instance, const SolverOptions& options = {});

/// Largest violation among: budget feasibility, price sign, complementary
/// slackness, bang-per-buck optimality, and bang-per-buck equality on the
/// support (entries above `support_threshold`).
double kkt_residual(const MarketInstance& instance, const Matrix& allocation,
                    const Vector& prices, double support_threshold = 1e-8);
double kkt_residual(const MarketInstance& instance, const EGSolution& candidate,
                    double support_threshold = 1e-8);

/// Sum over types of count * log(utility). Throws DomainError on a zero utility.
double log_nsw(const MarketInstance& instance, const Matrix& allocation);

/// Exhaustive search over a price grid for K <= 2 and at most three types.
/// `grid_resolution` is the spacing of the share of total money spent on
/// resource 0; the returned prices are the grid point closest to clearing.
EGSolution brute_force_eg(const MarketInstance& instance, double grid_resolution);

/// Utility error the brute-force grid can incur at the given resolution.
double brute_force_utility_bound(const MarketInstance& instance, double grid_resolution);

}  // namespace fairdiv
