#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

#include "codamed/errors.hpp"

namespace codamed::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derive an engine for the stream identified by (seed, a, b, c).
/// Streams differing in any key component are decorrelated, so replicates and
/// calibration tasks can run on any number of threads without the draw
/// sequence depending on the schedule.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t a = 0,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = seed;
  std::uint64_t k0 = splitmix64(s);
  s ^= 0xA0761D6478BD642FULL * (a + 1);
  std::uint64_t k1 = splitmix64(s);
  s ^= 0xE7037ED1A0B428DBULL * (b + 1);
  std::uint64_t k2 = splitmix64(s);
  s ^= 0x8EBC6AF09C88C6E3ULL * (c + 1);
  std::uint64_t k3 = splitmix64(s);
  std::seed_seq seq{
      static_cast<std::uint32_t>(k0), static_cast<std::uint32_t>(k0 >> 32),
      static_cast<std::uint32_t>(k1), static_cast<std::uint32_t>(k1 >> 32),
      static_cast<std::uint32_t>(k2), static_cast<std::uint32_t>(k2 >> 32),
      static_cast<std::uint32_t>(k3), static_cast<std::uint32_t>(k3 >> 32)};
  return std::mt19937_64(seq);
}

/// Total read count: Poisson(mu) when theta == 0, otherwise the gamma-Poisson
/// mixture with mean mu and variance mu * (1 + theta * mu).
inline std::int64_t sample_total_count(std::mt19937_64& gen, double mu, double theta) {
  if (mu <= 0.0) throw Error(errc::config_invalid, "mu must be positive");
  if (theta < 0.0) throw Error(errc::config_invalid, "theta must be >= 0");
  double lambda = mu;
  if (theta > 0.0) {
    std::gamma_distribution<double> gamma(1.0 / theta, theta * mu);
    lambda = gamma(gen);
  }
  if (lambda <= 0.0) return 0;
  std::poisson_distribution<std::int64_t> pois(lambda);
  return pois(gen);
}

inline Eigen::VectorXd sample_dirichlet(std::mt19937_64& gen, const Eigen::VectorXd& alpha) {
  Eigen::VectorXd draw(alpha.size());
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
      if (alpha[j] <= 0.0) throw Error(errc::config_invalid, "Dirichlet parameters must be positive");
      std::gamma_distribution<double> gamma(alpha[j], 1.0);
      draw[j] = gamma(gen);
    }
    double total = draw.sum();
    // With very small shapes every gamma draw can underflow to zero.
    if (total > 0.0) return draw / total;
  }
  throw Error(errc::config_invalid, "Dirichlet sampling underflowed repeatedly");
}

/// Conditional-binomial multinomial sampler.
inline Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> sample_multinomial(
    std::mt19937_64& gen, std::int64_t trials, const Eigen::VectorXd& probs) {
  const Eigen::Index m = probs.size();
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>::Zero(m);
  std::int64_t remaining = trials;
  double mass_left = 1.0;
  for (Eigen::Index j = 0; j + 1 < m && remaining > 0; ++j) {
    double p = probs[j] / mass_left;
    p = std::min(1.0, std::max(0.0, p));
    std::binomial_distribution<std::int64_t> binom(remaining, p);
    std::int64_t k = binom(gen);
    counts[j] = k;
    remaining -= k;
    mass_left -= probs[j];
    if (mass_left <= 0.0) break;
  }
  counts[m - 1] += remaining;
  return counts;
}

}  // namespace codamed::rng
