#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pmd/corpus.hpp"
#include "pmd/distill.hpp"
#include "pmd/model.hpp"
#include "pmd/optimizer.hpp"

namespace pmd {

struct StrategyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when training hits a non-finite loss; the run cannot continue and
// callers are expected to surface this as a hard failure.
struct TrainAbortError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class StrategyKind { kUni, kBi, kAuto, kDynamicMd, kLsmd };

const char* strategy_name(StrategyKind k);
StrategyKind strategy_from_name(const std::string& name);

// ---- fixed-weight strategies ----

// The model with the higher dev loss on a language distills from the other;
// ties leave both at zero.
std::pair<DistillWeights, DistillWeights> uni_update(
    const std::vector<double>& dev_ce_a, const std::vector<double>& dev_ce_b,
    double alpha_hyper);

// Both models distill everywhere with the same constant weight.
DistillWeights bi_update(std::size_t n, double alpha_hyper);

// Fixed language-specific weights, passed through unchanged.
DistillWeights lsmd_weights(const DistillWeights& fixed, std::size_t n);

// ---- sigmoid-space weight actions ----

enum class Action : std::uint8_t { kUp, kDown, kKeep };

const char* action_name(Action a);

// up: sigma(logit(a) + mu), down: sigma(logit(a) - mu), keep: exact identity.
// Results are clamped inside (0, 1) so repeated actions stay invertible.
double apply_action(double alpha, Action a, double mu);

DistillWeights apply_actions(const DistillWeights& prev,
                             const std::vector<Action>& row, double mu);

// Candidate subspace in fixed order: all-up, all-down, all-keep.
std::vector<std::vector<Action>> subspace_actions(std::size_t n);

// Every action tuple, lexicographic with digit order (up, down, keep) and
// language 0 most significant. Guarded: 3^n explodes, so n <= 8.
std::vector<std::vector<Action>> full_space_actions(std::size_t n);

// ---- step-size schedulers ----

enum class SchedulerVariant { kDefault, kFixedOne, kVariantTwo, kVariantThree };

const char* scheduler_name(SchedulerVariant v);
SchedulerVariant scheduler_from_name(const std::string& name);

// Decaying search radius. t is the current training step, t_max the step
// budget; t past t_max is an error.
double step_size(std::int64_t t, std::int64_t t_max, SchedulerVariant v);

// ---- trial-based search ----

// Per-candidate, per-language trial losses; rows follow the candidate order.
struct TrialResults {
  std::vector<std::vector<double>> rows;
};

// Evaluates one candidate weight vector to a per-language validation loss.
using TrialEvaluator = std::function<std::vector<double>(const DistillWeights&)>;

struct SearchResult {
  DistillWeights alpha;
  std::vector<Action> actions;  // chosen action per language
  TrialResults trials;          // empty when the search short-circuits
};

// Picks, independently per language, the candidate with the lowest trial
// loss; ties prefer keep over down over up. mu = 0 short-circuits to the
// previous weights without running any trials.
SearchResult search_subspace(const TrialEvaluator& eval,
                             const DistillWeights& prev, double mu);

// Exhaustive reference over every action tuple, same tie rule per language.
SearchResult search_full(const TrialEvaluator& eval, const DistillWeights& prev,
                         double mu);

// One uniform action for all languages, chosen by mean trial loss.
SearchResult search_uniform(const TrialEvaluator& eval,
                            const DistillWeights& prev, double mu);

// ---- the real trial evaluator ----

struct TrialSetup {
  const MultilingualCorpus* corpus = nullptr;
  OptimizerSpec optimizer;
  std::size_t batch_size = 1;
  double label_smoothing = 0.0;
  // Trial batch order is seeded per update round and shared by every
  // candidate of that round, so candidates differ only in their weights.
  std::uint64_t order_seed = 0;
};

// Clones the student, trains the clone for one pass over each language's
// trial pool (fresh optimizer, frozen teacher), then reports per-language
// validation cross entropy.
std::vector<double> run_trial(const ModelParams& student,
                              const ModelParams& teacher,
                              const DistillWeights& alpha,
                              const TrialSetup& setup);

TrialEvaluator make_trial_evaluator(const ModelParams& student,
                                    const ModelParams& teacher,
                                    const TrialSetup& setup);

// Whole-validation-split batch for one language.
Batch valid_batch(const MultilingualCorpus& corpus, std::size_t lang);

}  // namespace pmd
