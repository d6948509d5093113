#include "pmd/optimizer.hpp"

#include <cmath>
#include <string>

namespace pmd {

void OptimizerSpec::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw OptimizerError("optimizer: learning rate must be positive");
  if (kind == OptimizerKind::kAdam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0))
      throw OptimizerError("optimizer: beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0))
      throw OptimizerError("optimizer: beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0))
      throw OptimizerError("optimizer: epsilon must be positive");
  }
}

OptimizerState::OptimizerState(OptimizerSpec spec) : spec_(spec) {
  spec_.validate();
}

void OptimizerState::apply(
    const std::vector<std::pair<ParamId, RealArray*>>& params,
    const GradientMap& grads) {
  // Validate the whole update before touching any parameter, so a bad
  // gradient never leaves the model half-stepped.
  for (const auto& [pid, arr] : params) {
    auto it = grads.find(pid);
    if (it == grads.end())
      throw OptimizerError("optimizer: missing gradient for parameter " +
                           std::to_string(pid));
    if (!it->second.same_shape(*arr))
      throw OptimizerError("optimizer: gradient shape " +
                           it->second.shape_str() + " does not match parameter " +
                           std::to_string(pid) + " shape " + arr->shape_str());
    if (!it->second.all_finite())
      throw OptimizerError("optimizer: non-finite gradient for parameter " +
                           std::to_string(pid));
  }

  const std::int64_t t = steps_ + 1;
  for (const auto& [pid, arr] : params) {
    const RealArray& g = grads.at(pid);
    if (spec_.kind == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < arr->data.size(); ++i)
        arr->data[i] -= spec_.learning_rate * g.data[i];
      continue;
    }
    RealArray& m = m_.try_emplace(pid, RealArray::zeros(arr->shape)).first->second;
    RealArray& v = v_.try_emplace(pid, RealArray::zeros(arr->shape)).first->second;
    if (!m.same_shape(*arr))
      throw OptimizerError("optimizer: parameter " + std::to_string(pid) +
                           " changed shape between steps");
    const double c1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < arr->data.size(); ++i) {
      const double gi = g.data[i];
      m.data[i] = spec_.beta1 * m.data[i] + (1.0 - spec_.beta1) * gi;
      v.data[i] = spec_.beta2 * v.data[i] + (1.0 - spec_.beta2) * gi * gi;
      const double mhat = m.data[i] / c1;
      const double vhat = v.data[i] / c2;
      arr->data[i] -=
          spec_.learning_rate * mhat / (std::sqrt(vhat) + spec_.epsilon);
    }
  }
  steps_ = t;
}

}  // namespace pmd
