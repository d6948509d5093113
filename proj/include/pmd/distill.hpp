#pragma once

#include <stdexcept>
#include <vector>

#include "pmd/model.hpp"
#include "pmd/tape.hpp"

namespace pmd {

struct DistillError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-language distillation weights, each in [0, 1]. alpha[l] = 0 means pure
// supervised training on language l; 1 means pure distillation.
struct DistillWeights {
  std::vector<double> alpha;

  static DistillWeights zeros(std::size_t n);
  static DistillWeights constant(std::size_t n, double a);
  void validate() const;
  bool operator==(const DistillWeights&) const = default;
};

// Mean token-level cross entropy against the batch targets, optionally with
// label smoothing (target mass 1-eps on the gold symbol, eps/vocab
// elsewhere). Smoothing defaults to off everywhere in this codebase.
NodeId ce_loss(Tape& tape, const ModelDims& dims, const ModelLeaves& lv,
               const Batch& batch, double label_smoothing = 0.0);

// Mean token-level cross entropy of the student against fixed teacher rows
// (one distribution per source position). The teacher enters as a constant,
// so no gradient can reach it by construction.
NodeId kd_loss(Tape& tape, const ModelDims& dims, const ModelLeaves& lv,
               const Batch& batch, const RealArray& teacher_rows);

// (1 - alpha) * ce + alpha * kd. alpha = 0 and alpha = 1 return the bare
// term, bit-identical to building that term alone.
NodeId pmd_loss(Tape& tape, const ModelDims& dims, const ModelLeaves& lv,
                const Batch& batch, const RealArray& teacher_rows,
                double alpha, double label_smoothing = 0.0);

// Teacher predictive rows for a batch, detached by construction.
RealArray teacher_rows(const ModelParams& teacher, const Batch& batch);

// Forward-only mean cross entropy (no gradient bookkeeping).
double ce_value(const ModelParams& p, const Batch& batch,
                double label_smoothing = 0.0);

}  // namespace pmd
