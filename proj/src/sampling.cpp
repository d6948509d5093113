#include "pmd/sampling.hpp"

#include <cmath>

namespace pmd {

void SamplingDistribution::validate() const {
  if (probs.empty()) throw SamplingError("sampling: empty distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw SamplingError("sampling: probabilities must be nonnegative");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw SamplingError("sampling: probabilities must sum to 1");
}

SamplingDistribution temperature_distribution(
    const std::vector<std::size_t>& sizes, double tau) {
  if (sizes.empty()) throw SamplingError("sampling: no languages");
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw SamplingError("sampling: temperature must be positive");
  std::vector<double> logw(sizes.size());
  double m = -1e300;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw SamplingError("sampling: empty pool");
    logw[i] = std::log(static_cast<double>(sizes[i])) / tau;
    m = std::max(m, logw[i]);
  }
  SamplingDistribution d;
  d.temperature = tau;
  d.probs.resize(sizes.size());
  double z = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    d.probs[i] = std::exp(logw[i] - m);
    z += d.probs[i];
  }
  for (double& p : d.probs) p /= z;
  d.validate();
  return d;
}

std::size_t sample_language(const SamplingDistribution& dist, Rng& rng) {
  dist.validate();
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < dist.probs.size(); ++i) {
    cum += dist.probs[i];
    if (u < cum) return i;
  }
  return dist.probs.size() - 1;  // guards against cum rounding below 1
}

}  // namespace pmd
