#include "pmd/strategy.hpp"

#include <cmath>
#include <limits>

namespace pmd {

const char* strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::kUni: return "uni";
    case StrategyKind::kBi: return "bi";
    case StrategyKind::kAuto: return "auto";
    case StrategyKind::kDynamicMd: return "dynamic-md";
    case StrategyKind::kLsmd: return "lsmd";
  }
  return "?";
}

StrategyKind strategy_from_name(const std::string& name) {
  if (name == "uni") return StrategyKind::kUni;
  if (name == "bi") return StrategyKind::kBi;
  if (name == "auto") return StrategyKind::kAuto;
  if (name == "dynamic-md") return StrategyKind::kDynamicMd;
  if (name == "lsmd") return StrategyKind::kLsmd;
  throw StrategyError("strategy: unknown strategy '" + name + "'");
}

std::pair<DistillWeights, DistillWeights> uni_update(
    const std::vector<double>& dev_ce_a, const std::vector<double>& dev_ce_b,
    double alpha_hyper) {
  if (dev_ce_a.empty() || dev_ce_a.size() != dev_ce_b.size())
    throw StrategyError("uni: dev loss vectors must match per language");
  if (!(alpha_hyper >= 0.0 && alpha_hyper <= 1.0))
    throw StrategyError("uni: alpha must lie in [0, 1]");
  const std::size_t n = dev_ce_a.size();
  DistillWeights wa = DistillWeights::zeros(n);
  DistillWeights wb = DistillWeights::zeros(n);
  for (std::size_t l = 0; l < n; ++l) {
    if (!std::isfinite(dev_ce_a[l]) || !std::isfinite(dev_ce_b[l]))
      throw StrategyError("uni: non-finite dev loss");
    // Strictly worse model distills from the other; exact tie keeps both
    // supervised only.
    if (dev_ce_a[l] > dev_ce_b[l])
      wa.alpha[l] = alpha_hyper;
    else if (dev_ce_b[l] > dev_ce_a[l])
      wb.alpha[l] = alpha_hyper;
  }
  return {wa, wb};
}

DistillWeights bi_update(std::size_t n, double alpha_hyper) {
  if (n == 0) throw StrategyError("bi: need at least one language");
  if (!(alpha_hyper >= 0.0 && alpha_hyper <= 1.0))
    throw StrategyError("bi: alpha must lie in [0, 1]");
  return DistillWeights::constant(n, alpha_hyper);
}

DistillWeights lsmd_weights(const DistillWeights& fixed, std::size_t n) {
  fixed.validate();
  if (fixed.alpha.size() != n)
    throw StrategyError("lsmd: expected " + std::to_string(n) +
                        " fixed weights, got " +
                        std::to_string(fixed.alpha.size()));
  return fixed;
}

const char* action_name(Action a) {
  switch (a) {
    case Action::kUp: return "up";
    case Action::kDown: return "down";
    case Action::kKeep: return "keep";
  }
  return "?";
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double a) { return std::log(a) - std::log1p(-a); }

// Keep action results strictly inside (0, 1): repeated moves must stay
// invertible, and exact 0/1 would freeze the weight forever.
double clamp_open_unit(double v) {
  const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::min(std::max(v, std::numeric_limits<double>::min()), hi);
}

}  // namespace

double apply_action(double alpha, Action a, double mu) {
  if (!(mu >= 0.0) || !std::isfinite(mu))
    throw StrategyError("action: step size must be finite and nonnegative");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw StrategyError("action: alpha must lie in [0, 1]");
  if (a == Action::kKeep) return alpha;
  if (!(alpha > 0.0 && alpha < 1.0))
    throw StrategyError("action: alpha must lie strictly inside (0, 1)");
  const double shift = a == Action::kUp ? mu : -mu;
  return clamp_open_unit(stable_sigmoid(logit(alpha) + shift));
}

DistillWeights apply_actions(const DistillWeights& prev,
                             const std::vector<Action>& row, double mu) {
  prev.validate();
  if (row.size() != prev.alpha.size())
    throw StrategyError("action: one action per language required");
  DistillWeights out = prev;
  for (std::size_t l = 0; l < row.size(); ++l)
    out.alpha[l] = apply_action(prev.alpha[l], row[l], mu);
  return out;
}

std::vector<std::vector<Action>> subspace_actions(std::size_t n) {
  if (n == 0) throw StrategyError("action: need at least one language");
  return {std::vector<Action>(n, Action::kUp),
          std::vector<Action>(n, Action::kDown),
          std::vector<Action>(n, Action::kKeep)};
}

std::vector<std::vector<Action>> full_space_actions(std::size_t n) {
  if (n == 0) throw StrategyError("action: need at least one language");
  if (n > 8)
    throw StrategyError(
        "action: full search over 3^n candidates is capped at 8 languages");
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= 3;
  std::vector<std::vector<Action>> rows;
  rows.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<Action> row(n);
    std::size_t c = code;
    for (std::size_t l = n; l-- > 0;) {
      row[l] = static_cast<Action>(c % 3);
      c /= 3;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

const char* scheduler_name(SchedulerVariant v) {
  switch (v) {
    case SchedulerVariant::kDefault: return "default";
    case SchedulerVariant::kFixedOne: return "fixed-1";
    case SchedulerVariant::kVariantTwo: return "variant-2";
    case SchedulerVariant::kVariantThree: return "variant-3";
  }
  return "?";
}

SchedulerVariant scheduler_from_name(const std::string& name) {
  if (name == "default") return SchedulerVariant::kDefault;
  if (name == "fixed-1") return SchedulerVariant::kFixedOne;
  if (name == "variant-2") return SchedulerVariant::kVariantTwo;
  if (name == "variant-3") return SchedulerVariant::kVariantThree;
  throw StrategyError("scheduler: unknown variant '" + name + "'");
}

double step_size(std::int64_t t, std::int64_t t_max, SchedulerVariant v) {
  if (t_max <= 0) throw StrategyError("scheduler: step budget must be positive");
  if (t < 0) throw StrategyError("scheduler: negative step");
  if (t > t_max)
    throw StrategyError("scheduler: step " + std::to_string(t) +
                        " past the budget " + std::to_string(t_max));
  const double tt = static_cast<double>(t), tm = static_cast<double>(t_max);
  switch (v) {
    case SchedulerVariant::kFixedOne:
      return 1.0;
    case SchedulerVariant::kDefault:
      return std::sqrt((tm - tt) / tm);
    case SchedulerVariant::kVariantTwo:
      return std::sqrt((tm - 0.8 * tt) / tm);
    case SchedulerVariant::kVariantThree: {
      const double inner = (tm - 1.2 * tt) / tm;
      return inner <= 0.0 ? 0.0 : std::sqrt(inner);
    }
  }
  throw StrategyError("scheduler: unknown variant");
}

namespace {

int tie_rank(Action a) {
  switch (a) {
    case Action::kKeep: return 2;
    case Action::kDown: return 1;
    case Action::kUp: return 0;
  }
  return -1;
}

void check_trials(const TrialResults& r, std::size_t candidates,
                  std::size_t langs) {
  if (r.rows.size() != candidates)
    throw StrategyError("search: one trial row per candidate required");
  for (const auto& row : r.rows) {
    if (row.size() != langs)
      throw StrategyError("search: one trial loss per language required");
    for (double v : row)
      if (!std::isfinite(v))
        throw StrategyError("search: non-finite trial loss");
  }
}

SearchResult pick_per_language(const std::vector<std::vector<Action>>& actions,
                               const std::vector<DistillWeights>& candidates,
                               const TrialResults& trials,
                               std::size_t langs) {
  SearchResult res;
  res.alpha = DistillWeights::zeros(langs);
  res.actions.resize(langs);
  res.trials = trials;
  for (std::size_t l = 0; l < langs; ++l) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < candidates.size(); ++j) {
      const double cur = trials.rows[j][l], prev = trials.rows[best][l];
      if (cur < prev ||
          (cur == prev &&
           tie_rank(actions[j][l]) > tie_rank(actions[best][l])))
        best = j;
    }
    res.alpha.alpha[l] = candidates[best].alpha[l];
    res.actions[l] = actions[best][l];
  }
  return res;
}

SearchResult run_search(const TrialEvaluator& eval, const DistillWeights& prev,
                        double mu,
                        std::vector<std::vector<Action>> action_rows) {
  prev.validate();
  const std::size_t langs = prev.alpha.size();
  if (mu == 0.0) {
    SearchResult res;
    res.alpha = prev;
    res.actions.assign(langs, Action::kKeep);
    return res;
  }
  std::vector<DistillWeights> candidates;
  candidates.reserve(action_rows.size());
  for (const auto& row : action_rows)
    candidates.push_back(apply_actions(prev, row, mu));
  TrialResults trials;
  trials.rows.reserve(candidates.size());
  for (const auto& cand : candidates) trials.rows.push_back(eval(cand));
  check_trials(trials, candidates.size(), langs);
  return pick_per_language(action_rows, candidates, trials, langs);
}

}  // namespace

SearchResult search_subspace(const TrialEvaluator& eval,
                             const DistillWeights& prev, double mu) {
  return run_search(eval, prev, mu, subspace_actions(prev.alpha.size()));
}

SearchResult search_full(const TrialEvaluator& eval, const DistillWeights& prev,
                         double mu) {
  return run_search(eval, prev, mu, full_space_actions(prev.alpha.size()));
}

SearchResult search_uniform(const TrialEvaluator& eval,
                            const DistillWeights& prev, double mu) {
  prev.validate();
  const std::size_t langs = prev.alpha.size();
  if (mu == 0.0) {
    SearchResult res;
    res.alpha = prev;
    res.actions.assign(langs, Action::kKeep);
    return res;
  }
  const auto action_rows = subspace_actions(langs);
  std::vector<DistillWeights> candidates;
  for (const auto& row : action_rows)
    candidates.push_back(apply_actions(prev, row, mu));
  TrialResults trials;
  for (const auto& cand : candidates) trials.rows.push_back(eval(cand));
  check_trials(trials, candidates.size(), langs);

  std::size_t best = 0;
  double best_mean = 0.0;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    double mean = 0.0;
    for (double v : trials.rows[j]) mean += v;
    mean /= static_cast<double>(langs);
    if (j == 0 || mean < best_mean ||
        (mean == best_mean &&
         tie_rank(action_rows[j][0]) > tie_rank(action_rows[best][0]))) {
      best = j;
      best_mean = mean;
    }
  }
  SearchResult res;
  res.alpha = candidates[best];
  res.actions = action_rows[best];
  res.trials = trials;
  return res;
}

namespace {

enum : std::uint64_t { kTrialOrderStream = 17 };

double finite_loss(double v, const char* what) {
  if (!std::isfinite(v))
    throw TrainAbortError(std::string("training aborted: non-finite ") + what);
  return v;
}

}  // namespace

Batch valid_batch(const MultilingualCorpus& corpus, std::size_t lang) {
  Batch b;
  b.language = static_cast<std::int32_t>(lang);
  const std::size_t n = corpus.split_size(lang, Split::kValid);
  b.sources.reserve(n);
  b.targets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SentencePair& p = corpus.pair(lang, Split::kValid, i);
    b.sources.push_back(p.source);
    b.targets.push_back(p.target);
  }
  return b;
}

std::vector<double> run_trial(const ModelParams& student,
                              const ModelParams& teacher,
                              const DistillWeights& alpha,
                              const TrialSetup& setup) {
  if (setup.corpus == nullptr) throw StrategyError("trial: corpus not set");
  if (setup.batch_size == 0)
    throw StrategyError("trial: batch size must be positive");
  const MultilingualCorpus& corpus = *setup.corpus;
  const std::size_t langs = corpus.num_languages();
  if (alpha.alpha.size() != langs)
    throw StrategyError("trial: one weight per language required");
  alpha.validate();

  // Throwaway clone with fresh optimizer moments; the real model and its
  // optimizer are never touched by a trial.
  ModelParams copy = student;
  OptimizerState opt(setup.optimizer);
  auto params = param_list(copy);

  for (std::size_t l = 0; l < langs; ++l) {
    BatchCursor cursor(corpus, l, Split::kTrial,
                       derive_seed(setup.order_seed, kTrialOrderStream, l));
    const std::size_t pool = corpus.split_size(l, Split::kTrial);
    const std::size_t steps =
        (pool + setup.batch_size - 1) / setup.batch_size;
    for (std::size_t s = 0; s < steps; ++s) {
      Batch batch = cursor.draw(setup.batch_size);
      RealArray trows = teacher_rows(teacher, batch);
      Tape tape;
      ModelLeaves lv = register_params(tape, copy);
      NodeId root = pmd_loss(tape, copy.dims, lv, batch, trows,
                             alpha.alpha[l], setup.label_smoothing);
      finite_loss(tape.forward(root), "trial loss");
      opt.apply(params, tape.backward(root));
    }
  }

  // Validation loss is always the plain cross entropy; smoothing is a
  // training-time device only.
  std::vector<double> dev(langs);
  for (std::size_t l = 0; l < langs; ++l)
    dev[l] = finite_loss(ce_value(copy, valid_batch(corpus, l)),
                         "trial validation loss");
  return dev;
}

TrialEvaluator make_trial_evaluator(const ModelParams& student,
                                    const ModelParams& teacher,
                                    const TrialSetup& setup) {
  return [&student, &teacher, setup](const DistillWeights& alpha) {
    return run_trial(student, teacher, alpha, setup);
  };
}

}  // namespace pmd
