#include "pmd/distill.hpp"

#include <cmath>
#include <string>

namespace pmd {

DistillWeights DistillWeights::zeros(std::size_t n) {
  return DistillWeights{std::vector<double>(n, 0.0)};
}

DistillWeights DistillWeights::constant(std::size_t n, double a) {
  DistillWeights w{std::vector<double>(n, a)};
  w.validate();
  return w;
}

void DistillWeights::validate() const {
  if (alpha.empty()) throw DistillError("weights: empty weight vector");
  for (double a : alpha)
    if (!(a >= 0.0 && a <= 1.0))
      throw DistillError("weights: entries must lie in [0, 1]");
}

namespace {

// Supervised target rows: mass 1-eps on the gold symbol, eps/vocab spread
// over the whole row.
RealArray supervised_rows(const ModelDims& dims, const Batch& batch,
                          double label_smoothing) {
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw DistillError("loss: label smoothing must lie in [0, 1)");
  const std::size_t n = batch.total_tokens(), v = dims.vocab;
  RealArray rows = RealArray::zeros({n, v});
  const double off = label_smoothing / static_cast<double>(v);
  std::size_t i = 0;
  for (const auto& sent : batch.targets)
    for (std::int32_t t : sent) {
      if (off != 0.0)
        for (std::size_t j = 0; j < v; ++j) rows.at(i, j) = off;
      rows.at(i, static_cast<std::size_t>(t)) += 1.0 - label_smoothing;
      ++i;
    }
  return rows;
}

void check_teacher(const RealArray& teacher, std::size_t n, std::size_t v) {
  if (teacher.rank() != 2 || teacher.shape[0] != n || teacher.shape[1] != v)
    throw DistillError("loss: teacher rows have shape " + teacher.shape_str() +
                       ", expected " + std::to_string(n) + "x" +
                       std::to_string(v));
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      const double p = teacher.at(i, j);
      if (!(p >= 0.0) || !std::isfinite(p))
        throw DistillError("loss: teacher rows must be distributions");
      s += p;
    }
    if (std::fabs(s - 1.0) > 1e-6)
      throw DistillError("loss: teacher row " + std::to_string(i) +
                         " sums to " + std::to_string(s));
  }
}

// -(1/n) * sum(rows .* log_probs)
NodeId masked_mean_nll(Tape& tape, NodeId log_probs, RealArray rows,
                       std::size_t n) {
  NodeId picked = tape.multiply(log_probs, tape.constant(std::move(rows)));
  return tape.negate(
      tape.scale(tape.sum(picked), 1.0 / static_cast<double>(n)));
}

}  // namespace

NodeId ce_loss(Tape& tape, const ModelDims& dims, const ModelLeaves& lv,
               const Batch& batch, double label_smoothing) {
  batch.validate(dims);
  RealArray rows = supervised_rows(dims, batch, label_smoothing);
  NodeId lp = build_log_probs(tape, dims, lv, batch);
  return masked_mean_nll(tape, lp, std::move(rows), batch.total_tokens());
}

NodeId kd_loss(Tape& tape, const ModelDims& dims, const ModelLeaves& lv,
               const Batch& batch, const RealArray& teacher) {
  batch.validate(dims);
  check_teacher(teacher, batch.total_tokens(), dims.vocab);
  NodeId lp = build_log_probs(tape, dims, lv, batch);
  return masked_mean_nll(tape, lp, teacher, batch.total_tokens());
}

NodeId pmd_loss(Tape& tape, const ModelDims& dims, const ModelLeaves& lv,
                const Batch& batch, const RealArray& teacher, double alpha,
                double label_smoothing) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DistillError("loss: alpha must lie in [0, 1]");
  if (alpha == 0.0) return ce_loss(tape, dims, lv, batch, label_smoothing);
  if (alpha == 1.0) return kd_loss(tape, dims, lv, batch, teacher);

  batch.validate(dims);
  const std::size_t n = batch.total_tokens();
  check_teacher(teacher, n, dims.vocab);
  RealArray sup = supervised_rows(dims, batch, label_smoothing);
  NodeId lp = build_log_probs(tape, dims, lv, batch);
  NodeId ce = masked_mean_nll(tape, lp, std::move(sup), n);
  NodeId kd = masked_mean_nll(tape, lp, teacher, n);
  return tape.add(tape.scale(ce, 1.0 - alpha), tape.scale(kd, alpha));
}

RealArray teacher_rows(const ModelParams& teacher, const Batch& batch) {
  return predict_distribution(teacher, batch);
}

double ce_value(const ModelParams& p, const Batch& batch,
                double label_smoothing) {
  Tape tape;
  ModelLeaves lv = register_constants(tape, p);
  return tape.forward(ce_loss(tape, p.dims, lv, batch, label_smoothing));
}

}  // namespace pmd
