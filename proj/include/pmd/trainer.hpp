#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmd/corpus.hpp"
#include "pmd/model.hpp"
#include "pmd/optimizer.hpp"
#include "pmd/sampling.hpp"
#include "pmd/strategy.hpp"

namespace pmd {

struct TrainerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  CorpusSpec corpus;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 32;

  // Language sampling temperatures: tau_a drives model 1 (proportional by
  // default), tau_b drives model 2 (flatter, favoring the long tail).
  double tau_a = 1.0;
  double tau_b = 5.0;

  StrategyKind strategy = StrategyKind::kAuto;
  double alpha_hyper = 0.4;           // uni and bi
  std::vector<double> fixed_alpha;     // lsmd only
  SchedulerVariant scheduler = SchedulerVariant::kDefault;

  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  // Steps between weight updates; 0 means one proportional-sampling epoch.
  std::int64_t update_interval = 0;
  OptimizerSpec optimizer;
  double label_smoothing = 0.0;
  std::uint64_t run_seed = 1;

  void validate() const;
  ModelDims model_dims() const;
  std::int64_t steps_per_epoch() const;  // ceil(total train pairs / batch)
  std::int64_t resolved_update_interval() const;
  std::int64_t max_steps() const;  // epochs * steps_per_epoch
};

struct EvalResult {
  double ce = 0.0;
  double accuracy = 0.0;
};

// Per-language validation cross entropy and symbol accuracy.
std::vector<EvalResult> evaluate(const ModelParams& p,
                                 const MultilingualCorpus& corpus);

// Languages are ordered by pool size; the first (larger) half counts as
// high-resource, the remaining floor(L/2) as low-resource.
std::size_t lrl_start(std::size_t num_languages);
double mean_ce(const std::vector<EvalResult>& evals, std::size_t lo,
               std::size_t hi);

struct ModelSnap {
  int label = 0;  // 1-based; baselines keep the slot label they decouple from
  std::vector<EvalResult> eval;
  std::vector<double> alpha;
};

struct Snapshot {
  std::int64_t step = 0;
  double mu = 0.0;  // nonzero only when a weight search ran at this step
  std::vector<ModelSnap> models;
};

struct WeightLogRow {
  std::int64_t round = 0;
  int label = 0;
  std::int64_t step = 0;
  double mu = 0.0;
  std::vector<Action> actions;
  std::vector<double> alpha;
};

struct RunRecord {
  TrainConfig config;
  std::vector<int> labels;  // per trained model
  std::vector<Snapshot> snapshots;
  std::vector<WeightLogRow> weight_log;  // search strategies only
  std::vector<ModelParams> finals;
  std::int64_t steps = 0;

  const Snapshot& final_snapshot() const;
  const ModelSnap& final_model(int label) const;
};

// Two models, mutual distillation, weight strategy per config.
RunRecord train_pareto(const TrainConfig& config);

// Single supervised model occupying one slot of the two-model layout: slot 0
// trains under tau_a, slot 1 under tau_b, and both consume exactly the
// random streams that slot would consume inside train_pareto. A mutual run
// whose weights are pinned to zero is therefore bit-identical to the pair of
// baselines.
RunRecord train_baseline(const TrainConfig& config, int slot);

}  // namespace pmd
