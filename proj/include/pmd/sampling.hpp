#pragma once

#include <stdexcept>
#include <vector>

#include "pmd/rng.hpp"

namespace pmd {

struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SamplingDistribution {
  std::vector<double> probs;
  double temperature = 1.0;

  void validate() const;  // nonnegative entries summing to 1 within 1e-12
};

// P(l) proportional to pool_size^(1/tau), computed in log space so huge pools
// and small temperatures cannot overflow. tau = 1 recovers proportional
// sampling; larger tau flattens toward uniform.
SamplingDistribution temperature_distribution(
    const std::vector<std::size_t>& sizes, double tau);

// Inverse-CDF draw; consumes exactly one uniform from rng.
std::size_t sample_language(const SamplingDistribution& dist, Rng& rng);

}  // namespace pmd
