#pragma once

// Independent reference implementations used to check the library. Everything
// here recomputes expected values from first principles (finite differences,
// brute-force enumeration, closed forms) without touching the code paths
// under test beyond plain forward evaluation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "pmd/array.hpp"
#include "pmd/rng.hpp"
#include "pmd/tape.hpp"

namespace oracle {

using ParamMap = std::map<pmd::ParamId, pmd::RealArray>;
using LossFn = std::function<double(const ParamMap&)>;

// Central differences, one rebuild of the loss per perturbed entry.
inline ParamMap fd_gradients(const ParamMap& params, const LossFn& f,
                             double h) {
  ParamMap grads;
  for (const auto& [pid, arr] : params)
    grads[pid] = pmd::RealArray::zeros(arr.shape);
  for (const auto& [pid, arr] : params) {
    for (std::size_t i = 0; i < arr.size(); ++i) {
      ParamMap hi = params, lo = params;
      hi[pid].data[i] += h;
      lo[pid].data[i] -= h;
      grads[pid].data[i] = (f(hi) - f(lo)) / (2.0 * h);
    }
  }
  return grads;
}

// Mixed tolerance: relative 'rel' away from zero, absolute 'abs' near zero.
inline bool close(double got, double want, double rel, double abs) {
  return std::fabs(got - want) <= std::max(rel * std::fabs(want), abs);
}

// Stable softmax computed directly, for checking the model's distributions.
inline std::vector<double> softmax(const std::vector<double>& logits) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i)
    p[i] = std::exp(logits[i] - m) / s;
  return p;
}

// A small graph family that exercises every tape primitive. The structure is
// fixed per instance (dims, lookup rows, constants drawn once from rng) and
// can be rebuilt on demand, which is what finite differencing needs.
struct RandomGraph {
  std::size_t n, k, m;
  std::vector<std::int32_t> lookup_rows;  // n entries into a 4-row table
  pmd::RealArray mask;                    // n x m constant
  double factor;
  ParamMap params;  // ids 0..4: table, a, b, c, d

  static RandomGraph make(pmd::Rng& rng) {
    RandomGraph g;
    g.n = 1 + rng.index(3);
    g.k = 1 + rng.index(3);
    g.m = 2 + rng.index(3);
    g.lookup_rows.resize(g.n);
    for (auto& r : g.lookup_rows)
      r = static_cast<std::int32_t>(rng.index(4));
    auto rand_arr = [&rng](std::vector<std::size_t> shape) {
      pmd::RealArray a = pmd::RealArray::zeros(std::move(shape));
      for (double& v : a.data) v = rng.uniform(-2.0, 2.0);
      return a;
    };
    g.params[0] = rand_arr({4, g.k});
    g.params[1] = rand_arr({g.n, g.k});
    g.params[2] = rand_arr({g.k, g.m});
    g.params[3] = rand_arr({g.n, g.m});
    g.params[4] = rand_arr({g.n, g.m});
    g.mask = rand_arr({g.n, g.m});
    g.factor = rng.uniform(0.5, 1.5);
    return g;
  }

  pmd::NodeId build(pmd::Tape& tape, const ParamMap& p, bool as_leaves) const {
    auto in = [&](pmd::ParamId id) {
      return as_leaves ? tape.leaf(p.at(id), id) : tape.constant(p.at(id));
    };
    pmd::NodeId x = tape.add(in(1), tape.row_lookup(in(0), lookup_rows));
    pmd::NodeId y = tape.tanh(tape.matmul(x, in(2)));
    pmd::NodeId z = tape.multiply(y, in(3));
    pmd::NodeId w = tape.log_softmax(tape.add(z, in(4)));
    pmd::NodeId s1 = tape.sum(tape.multiply(w, tape.constant(mask)));
    pmd::NodeId s2 = tape.sum(z);
    return tape.add(tape.scale(s1, factor), tape.negate(s2));
  }

  double eval(const ParamMap& p) const {
    pmd::Tape tape;
    pmd::NodeId root = build(tape, p, /*as_leaves=*/false);
    return tape.forward(root);
  }
};

}  // namespace oracle
