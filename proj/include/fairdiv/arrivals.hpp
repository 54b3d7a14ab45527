#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace fairdiv {

using Rng = std::mt19937_64;

/// Arrival counts, one row per round and one column per type.
using ArrivalMatrix = Eigen::MatrixXi;

/// Seed for run `index` derived from a base seed; independent of evaluation order.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index);

struct Deterministic {
  int n = 1;
};

/// max(1, X) with X ~ Poisson(lambda).
struct ClampedPoisson {
  double lambda = 1.0;
};

/// max(1, round(Z)) with Z ~ Normal(mu, sigma^2), rounding half away from zero.
struct ClampedNormal {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Finite distribution over counts >= 1.
struct Empirical {
  std::map<int, double> histogram;
};

using ArrivalModel = std::variant<Deterministic, ClampedPoisson, ClampedNormal, Empirical>;

/// Throws ValidationError when the model's parameters are out of range.
void validate(const ArrivalModel& model);

int sample(const ArrivalModel& model, Rng& rng);

/// Exact expectation of the clamped law.
double mean(const ArrivalModel& model);

/// Sub-Gaussian width of one round's count: 0 when deterministic, half the
/// support range for empirical histograms, sigma for normals, sqrt(lambda)
/// for Poisson.
double deviation_proxy(const ArrivalModel& model);

std::string describe(const ArrivalModel& model);

/// Arrival models for every round and type plus the confidence widths
/// of the tail sums. Rounds are numbered 1..T; index t in `tail_mean`
/// and `conf` refers to the arrivals strictly after round t.
class HorizonSpec {
 public:
  /// `models[r][i]` is the law of round r+1 for type i.
  HorizonSpec(double delta, std::vector<std::vector<ArrivalModel>> models);

  int rounds() const { return rounds_; }
  int num_types() const { return types_; }
  double delta() const { return delta_; }
  const ArrivalModel& model(int round, int type) const { return models_[round][type]; }

  double tail_mean(int t, int type) const;
  double conf(int t, int type) const;
  double rho_max() const { return rho_max_; }

  /// Expected total arrivals of each type over the horizon.
  Eigen::VectorXd expected_totals() const;

  ArrivalMatrix sample_arrivals(Rng& rng) const;

  /// Whether every tail sum of `arrivals` lies within its confidence width.
  bool concentration_holds(const ArrivalMatrix& arrivals) const;

 private:
  void check_t(int t) const;

  double delta_;
  int rounds_;
  int types_;
  std::vector<std::vector<ArrivalModel>> models_;
  double rho_max_ = 0.0;
  Eigen::MatrixXd tail_means_;  // (T+1) x types
};

/// Conf width for `remaining` rounds: sqrt(2 * remaining * rho^2 * log(T * types / delta)).
double confidence_width(int remaining, int rounds, int types, double rho_max, double delta);

}  // namespace fairdiv
