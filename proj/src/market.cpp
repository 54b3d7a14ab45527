#include "fairdiv/market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fairdiv/errors.hpp"

namespace fairdiv {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

MarketInstance::MarketInstance(Vector budgets, std::vector<AgentType> types)
    : budgets_(std::move(budgets)), types_(std::move(types)) {
  if (budgets_.size() == 0) throw ValidationError("market instance needs at least one resource");
  if (types_.empty()) throw ValidationError("market instance needs at least one type");
  for (Eigen::Index k = 0; k < budgets_.size(); ++k) {
    if (!positive_finite(budgets_[k])) {
      std::ostringstream msg;
      msg << "budget of resource " << k << " must be strictly positive, got " << budgets_[k];
      throw ValidationError(msg.str());
    }
  }
  for (const auto& type : types_) {
    if (type.weights.size() != budgets_.size()) {
      throw ValidationError("type '" + type.id + "' has " + std::to_string(type.weights.size()) +
                            " weights for " + std::to_string(budgets_.size()) + " resources");
    }
    for (Eigen::Index k = 0; k < type.weights.size(); ++k) {
      if (!positive_finite(type.weights[k])) {
        throw ValidationError("type '" + type.id + "' has a non-positive weight");
      }
    }
    if (!positive_finite(type.count)) {
      throw ValidationError("type '" + type.id + "' has a non-positive count");
    }
  }
}

Matrix MarketInstance::weight_matrix() const {
  Matrix w(num_types(), num_resources());
  for (int i = 0; i < num_types(); ++i) w.row(i) = types_[i].weights.transpose();
  return w;
}

Vector MarketInstance::counts() const {
  Vector n(num_types());
  for (int i = 0; i < num_types(); ++i) n[i] = types_[i].count;
  return n;
}

Vector MarketInstance::beta_avg() const { return budgets_ / total_count(); }

double MarketInstance::weight_min() const { return weight_matrix().minCoeff(); }

double MarketInstance::weight_max() const { return weight_matrix().maxCoeff(); }

MarketInstance MarketInstance::with_counts(const Vector& counts) const {
  if (counts.size() != num_types()) throw ValidationError("count vector has the wrong length");
  auto types = types_;
  for (int i = 0; i < num_types(); ++i) types[i].count = counts[i];
  return MarketInstance(budgets_, std::move(types));
}

Vector EGSolution::utilities(const MarketInstance& instance) const {
  return (allocation.cwiseProduct(instance.weight_matrix())).rowwise().sum();
}

double kkt_residual(const MarketInstance& instance, const Matrix& allocation, const Vector& prices,
                    double support_threshold) {
  const int types = instance.num_types();
  const int resources = instance.num_resources();
  if (allocation.rows() != types || allocation.cols() != resources || prices.size() != resources) {
    throw ValidationError("candidate dimensions do not match the instance");
  }
  const Matrix w = instance.weight_matrix();
  const Vector n = instance.counts();
  const Vector u = allocation.cwiseProduct(w).rowwise().sum();

  double residual = 0.0;
  for (int k = 0; k < resources; ++k) {
    const double used = n.dot(allocation.col(k));
    const double slack = instance.budgets()[k] - used;
    residual = std::max(residual, -slack);
    residual = std::max(residual, -prices[k]);
    residual = std::max(residual, std::abs(prices[k] * slack));
  }
  for (int i = 0; i < types; ++i) {
    for (int k = 0; k < resources; ++k) {
      if (allocation(i, k) < 0.0) residual = std::max(residual, -allocation(i, k));
      if (prices[k] <= 0.0) {
        // Bang-per-buck is unbounded at a non-positive price.
        residual = std::max(residual, std::numeric_limits<double>::infinity());
        continue;
      }
      const double bang = w(i, k) / prices[k];
      residual = std::max(residual, bang - u[i]);
      if (allocation(i, k) > support_threshold) residual = std::max(residual, std::abs(bang - u[i]));
    }
  }
  return residual;
}

double kkt_residual(const MarketInstance& instance, const EGSolution& candidate,
                    double support_threshold) {
  return kkt_residual(instance, candidate.allocation, candidate.prices, support_threshold);
}

double log_nsw(const MarketInstance& instance, const Matrix& allocation) {
  if (allocation.rows() != instance.num_types() || allocation.cols() != instance.num_resources()) {
    throw ValidationError("allocation dimensions do not match the instance");
  }
  if ((allocation.array() < 0.0).any()) throw DomainError("allocation has a negative entry");
  const Vector u = allocation.cwiseProduct(instance.weight_matrix()).rowwise().sum();
  double total = 0.0;
  for (int i = 0; i < instance.num_types(); ++i) {
    if (!(u[i] > 0.0)) {
      throw DomainError("type '" + instance.types()[i].id + "' has zero utility; log NSW undefined");
    }
    total += instance.count(i) * std::log(u[i]);
  }
  return total;
}

EGSolution solve_eg(const MarketInstance& instance, const SolverOptions& options) {
  if (!(options.tolerance > 0.0)) throw ValidationError("solver tolerance must be positive");
  if (options.max_iterations < 1) throw ValidationError("max_iterations must be at least 1");

  const int types = instance.num_types();
  const int resources = instance.num_resources();
  const Matrix w = instance.weight_matrix();
  const Vector n = instance.counts();
  const Vector& budgets = instance.budgets();

  // money[i, k]: total spend of type i on resource k; each individual holds one unit.
  Matrix money(types, resources);
  for (int i = 0; i < types; ++i) money.row(i).setConstant(n[i] / resources);

  EGSolution best;
  best.kkt_residual = std::numeric_limits<double>::infinity();
  Matrix x(types, resources);
  Vector p(resources);

  for (long iter = 1; iter <= options.max_iterations; ++iter) {
    for (int k = 0; k < resources; ++k) p[k] = money.col(k).sum() / budgets[k];
    for (int i = 0; i < types; ++i) {
      for (int k = 0; k < resources; ++k) x(i, k) = money(i, k) / (p[k] * n[i]);
    }

    const double residual = kkt_residual(instance, x, p, options.tolerance);
    if (residual < best.kkt_residual) {
      best.allocation = x;
      best.prices = p;
      best.kkt_residual = residual;
      best.iterations = iter;
    }
    if (residual <= options.tolerance) return best;

    for (int i = 0; i < types; ++i) {
      const double u = w.row(i).dot(x.row(i));
      for (int k = 0; k < resources; ++k) money(i, k) = n[i] * w(i, k) * x(i, k) / u;
    }
  }

  std::ostringstream msg;
  msg << "Eisenberg-Gale solver did not reach tolerance " << options.tolerance << " in "
      << options.max_iterations << " iterations (best residual " << best.kkt_residual << ")";
  throw ConvergenceError(msg.str(), best.kkt_residual, options.max_iterations);
}

namespace {

void check_brute_force_size(const MarketInstance& instance, double grid_resolution) {
  if (instance.num_resources() > 2 || instance.num_types() > 3) {
    throw ValidationError("brute-force oracle only handles K <= 2 resources and at most 3 types");
  }
  if (!(grid_resolution > 0.0 && grid_resolution < 0.5)) {
    throw ValidationError("grid resolution must lie in (0, 0.5)");
  }
}

// Smallest equilibrium share of total money any resource can command, from the
// price floor p_k >= (w_min / w_max) / ||beta_avg||_1.
double min_money_share(const MarketInstance& instance) {
  const Vector beta = instance.beta_avg();
  return (instance.weight_min() / instance.weight_max()) * beta.minCoeff() / beta.sum();
}

}  // namespace

double brute_force_utility_bound(const MarketInstance& instance, double grid_resolution) {
  check_brute_force_size(instance, grid_resolution);
  if (instance.num_resources() == 1) return 0.0;
  const double s = min_money_share(instance);
  const Vector beta = instance.beta_avg();
  const double price_floor = (instance.weight_min() / instance.weight_max()) / beta.sum();
  const double max_utility = instance.weight_max() / price_floor;
  // Nearest grid neighbour plus the tie window used to admit flexible types.
  return max_utility * 4.0 * grid_resolution / (s * s);
}

EGSolution brute_force_eg(const MarketInstance& instance, double grid_resolution) {
  check_brute_force_size(instance, grid_resolution);
  const int types = instance.num_types();
  const int resources = instance.num_resources();
  const Matrix w = instance.weight_matrix();
  const Vector n = instance.counts();
  const Vector& budgets = instance.budgets();
  const double money_total = n.sum();

  EGSolution best;
  best.kkt_residual = std::numeric_limits<double>::infinity();

  if (resources == 1) {
    best.prices = Vector::Constant(1, money_total / budgets[0]);
    best.allocation = Matrix::Constant(types, 1, budgets[0] / money_total);
    best.kkt_residual = kkt_residual(instance, best);
    best.iterations = 1;
    return best;
  }

  const long steps = static_cast<long>(std::ceil(1.0 / grid_resolution));
  Matrix money(types, 2);
  Matrix x(types, 2);
  Vector p(2);
  for (long j = 1; j < steps; ++j) {
    const double share = static_cast<double>(j) / static_cast<double>(steps);
    p[0] = share * money_total / budgets[0];
    p[1] = (1.0 - share) * money_total / budgets[1];
    const double tie_window = 2.0 / (static_cast<double>(steps) * share * (1.0 - share));

    // Strict preferences are forced; near-indifferent types may split freely.
    double forced_on_first = 0.0;
    double flexible = 0.0;
    std::vector<int> flexible_types;
    for (int i = 0; i < types; ++i) {
      const double r0 = w(i, 0) / p[0];
      const double r1 = w(i, 1) / p[1];
      const double gap = (r0 - r1) / std::max(r0, r1);
      money.row(i).setZero();
      if (std::abs(gap) <= tie_window) {
        flexible += n[i];
        flexible_types.push_back(i);
      } else if (gap > 0.0) {
        money(i, 0) = n[i];
        forced_on_first += n[i];
      } else {
        money(i, 1) = n[i];
      }
    }
    const double supply_money = share * money_total;
    double wanted = std::clamp(supply_money - forced_on_first, 0.0, flexible);
    for (int i : flexible_types) {
      const double spend = std::min(wanted, n[i]);
      money(i, 0) = spend;
      money(i, 1) = n[i] - spend;
      wanted -= spend;
    }
    for (int i = 0; i < types; ++i) {
      for (int k = 0; k < 2; ++k) x(i, k) = money(i, k) / (p[k] * n[i]);
    }
    const double residual = kkt_residual(instance, x, p, grid_resolution);
    if (residual < best.kkt_residual) {
      best.allocation = x;
      best.prices = p;
      best.kkt_residual = residual;
      best.iterations = j;
    }
  }
  return best;
}

}  // namespace fairdiv
