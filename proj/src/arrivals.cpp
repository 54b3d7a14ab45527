#include "fairdiv/arrivals.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fairdiv/errors.hpp"

namespace fairdiv {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double clamped_normal_mean(const ClampedNormal& m) {
  // P(round(Z) <= 1) contributes 1; each n >= 2 contributes n * P(round(Z) = n).
  const double upper = m.mu + 40.0 * m.sigma;
  if (upper < 1.5) return 1.0;
  double total = normal_cdf((1.5 - m.mu) / m.sigma);
  const long last = static_cast<long>(std::ceil(upper)) + 1;
  for (long n = 2; n <= last; ++n) {
    const double lo = normal_cdf((static_cast<double>(n) - 0.5 - m.mu) / m.sigma);
    const double hi = normal_cdf((static_cast<double>(n) + 0.5 - m.mu) / m.sigma);
    total += static_cast<double>(n) * (hi - lo);
  }
  return total;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(splitmix64(base_seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

void validate(const ArrivalModel& model) {
  std::visit(overloaded{
                 [](const Deterministic& m) {
                   if (m.n < 1) throw ValidationError("deterministic arrivals must be >= 1");
                 },
                 [](const ClampedPoisson& m) {
                   if (!(m.lambda > 0.0) || !std::isfinite(m.lambda))
                     throw ValidationError("Poisson rate must be positive");
                 },
                 [](const ClampedNormal& m) {
                   if (!std::isfinite(m.mu)) throw ValidationError("normal mean must be finite");
                   if (!(m.sigma > 0.0) || !std::isfinite(m.sigma))
                     throw ValidationError("normal sigma must be positive");
                 },
                 [](const Empirical& m) {
                   if (m.histogram.empty()) throw ValidationError("empirical histogram is empty");
                   double total = 0.0;
                   for (const auto& [count, prob] : m.histogram) {
                     if (count < 1) throw ValidationError("empirical counts must be >= 1");
                     if (!(prob >= 0.0)) throw ValidationError("empirical probabilities must be >= 0");
                     total += prob;
                   }
                   if (std::abs(total - 1.0) > 1e-12)
                     throw ValidationError("empirical probabilities must sum to 1");
                 },
             },
             model);
}

int sample(const ArrivalModel& model, Rng& rng) {
  return std::visit(
      overloaded{
          [](const Deterministic& m) { return m.n; },
          [&rng](const ClampedPoisson& m) {
            std::poisson_distribution<int> draw(m.lambda);
            return std::max(1, draw(rng));
          },
          [&rng](const ClampedNormal& m) {
            std::normal_distribution<double> draw(m.mu, m.sigma);
            const double z = std::round(draw(rng));
            return z < 1.0 ? 1 : static_cast<int>(z);
          },
          [&rng](const Empirical& m) {
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            const double u = unif(rng);
            double cumulative = 0.0;
            for (const auto& [count, prob] : m.histogram) {
              cumulative += prob;
              if (u < cumulative) return count;
            }
            return m.histogram.rbegin()->first;
          },
      },
      model);
}

double mean(const ArrivalModel& model) {
  return std::visit(overloaded{
                        [](const Deterministic& m) { return static_cast<double>(m.n); },
                        [](const ClampedPoisson& m) { return m.lambda + std::exp(-m.lambda); },
                        [](const ClampedNormal& m) { return clamped_normal_mean(m); },
                        [](const Empirical& m) {
                          double total = 0.0;
                          for (const auto& [count, prob] : m.histogram) total += count * prob;
                          return total;
                        },
                    },
                    model);
}

double deviation_proxy(const ArrivalModel& model) {
  return std::visit(overloaded{
                        [](const Deterministic&) { return 0.0; },
                        [](const ClampedPoisson& m) { return std::sqrt(m.lambda); },
                        [](const ClampedNormal& m) { return m.sigma; },
                        [](const Empirical& m) {
                          const double lo = m.histogram.begin()->first;
                          const double hi = m.histogram.rbegin()->first;
                          return 0.5 * (hi - lo);
                        },
                    },
                    model);
}

std::string describe(const ArrivalModel& model) {
  std::ostringstream out;
  std::visit(overloaded{
                 [&](const Deterministic& m) { out << "deterministic(" << m.n << ")"; },
                 [&](const ClampedPoisson& m) { out << "poisson(" << m.lambda << ")"; },
                 [&](const ClampedNormal& m) { out << "normal(" << m.mu << ", " << m.sigma << ")"; },
                 [&](const Empirical& m) { out << "empirical(" << m.histogram.size() << " points)"; },
             },
             model);
  return out.str();
}

double confidence_width(int remaining, int rounds, int types, double rho_max, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (remaining <= 0) return 0.0;
  const double log_term = std::log(static_cast<double>(rounds) * types / delta);
  return std::sqrt(2.0 * remaining * rho_max * rho_max * log_term);
}

HorizonSpec::HorizonSpec(double delta, std::vector<std::vector<ArrivalModel>> models)
    : delta_(delta), rounds_(static_cast<int>(models.size())), models_(std::move(models)) {
  if (!(delta_ > 0.0 && delta_ < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (rounds_ < 1) throw ValidationError("horizon needs at least one round");
  types_ = static_cast<int>(models_.front().size());
  if (types_ < 1) throw ValidationError("horizon needs at least one type");
  for (const auto& row : models_) {
    if (static_cast<int>(row.size()) != types_)
      throw ValidationError("every round must list one arrival model per type");
    for (const auto& m : row) {
      validate(m);
      rho_max_ = std::max(rho_max_, deviation_proxy(m));
    }
  }
  tail_means_ = Eigen::MatrixXd::Zero(rounds_ + 1, types_);
  for (int t = rounds_ - 1; t >= 0; --t) {
    for (int i = 0; i < types_; ++i) tail_means_(t, i) = tail_means_(t + 1, i) + mean(models_[t][i]);
  }
}

void HorizonSpec::check_t(int t) const {
  if (t < 0 || t > rounds_) throw ValidationError("round index outside 0..T");
}

double HorizonSpec::tail_mean(int t, int type) const {
  check_t(t);
  return tail_means_(t, type);
}

double HorizonSpec::conf(int t, int /*type*/) const {
  check_t(t);
  return confidence_width(rounds_ - t, rounds_, types_, rho_max_, delta_);
}

Eigen::VectorXd HorizonSpec::expected_totals() const { return tail_means_.row(0).transpose(); }

ArrivalMatrix HorizonSpec::sample_arrivals(Rng& rng) const {
  ArrivalMatrix arrivals(rounds_, types_);
  for (int t = 0; t < rounds_; ++t) {
    for (int i = 0; i < types_; ++i) arrivals(t, i) = sample(models_[t][i], rng);
  }
  return arrivals;
}

bool HorizonSpec::concentration_holds(const ArrivalMatrix& arrivals) const {
  if (arrivals.rows() != rounds_ || arrivals.cols() != types_)
    throw ValidationError("arrival matrix shape does not match the horizon");
  for (int i = 0; i < types_; ++i) {
    double tail = 0.0;
    for (int t = rounds_; t >= 0; --t) {
      if (t < rounds_) tail += arrivals(t, i);
      if (std::abs(tail - tail_means_(t, i)) > conf(t, i)) return false;
    }
  }
  return true;
}

}  // namespace fairdiv
