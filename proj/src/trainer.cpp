#include "pmd/trainer.hpp"

#include <cmath>

#include "pmd/distill.hpp"

namespace pmd {

void TrainConfig::validate() const {
  corpus.validate();
  try {
    model_dims().validate();
  } catch (const ModelError& e) {
    throw TrainerError(std::string("config: ") + e.what());
  }
  if (!(tau_a > 0.0) || !(tau_b > 0.0))
    throw TrainerError("config: temperatures must be positive");
  if (!(alpha_hyper >= 0.0 && alpha_hyper <= 1.0))
    throw TrainerError("config: alpha must lie in [0, 1]");
  if (strategy == StrategyKind::kLsmd) {
    if (fixed_alpha.size() != corpus.num_languages)
      throw TrainerError("config: lsmd needs one fixed weight per language");
    DistillWeights{fixed_alpha}.validate();
  }
  if (batch_size == 0) throw TrainerError("config: batch size must be positive");
  if (epochs == 0) throw TrainerError("config: need at least one epoch");
  if (update_interval < 0)
    throw TrainerError("config: update interval cannot be negative");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw TrainerError("config: label smoothing must lie in [0, 1)");
  optimizer.validate();
}

ModelDims TrainConfig::model_dims() const {
  return ModelDims{corpus.vocab_size(), embed_dim, hidden_dim,
                   corpus.num_languages};
}

std::int64_t TrainConfig::steps_per_epoch() const {
  std::size_t total = 0;
  for (std::size_t n : corpus.sizes) total += n;
  return static_cast<std::int64_t>((total + batch_size - 1) / batch_size);
}

std::int64_t TrainConfig::resolved_update_interval() const {
  return update_interval == 0 ? steps_per_epoch() : update_interval;
}

std::int64_t TrainConfig::max_steps() const {
  return static_cast<std::int64_t>(epochs) * steps_per_epoch();
}

std::vector<EvalResult> evaluate(const ModelParams& p,
                                 const MultilingualCorpus& corpus) {
  std::vector<EvalResult> out(corpus.num_languages());
  for (std::size_t l = 0; l < corpus.num_languages(); ++l) {
    Batch vb = valid_batch(corpus, l);
    RealArray lp = log_prob_rows(p, vb);
    std::vector<std::int32_t> targets;
    targets.reserve(vb.total_tokens());
    for (const auto& s : vb.targets)
      targets.insert(targets.end(), s.begin(), s.end());
    double nll = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      nll -= lp.at(i, static_cast<std::size_t>(targets[i]));
      std::size_t best = 0;
      for (std::size_t j = 1; j < p.dims.vocab; ++j)
        if (lp.at(i, j) > lp.at(i, best)) best = j;
      correct += best == static_cast<std::size_t>(targets[i]);
    }
    const double n = static_cast<double>(targets.size());
    out[l] = EvalResult{nll / n, static_cast<double>(correct) / n};
  }
  return out;
}

std::size_t lrl_start(std::size_t num_languages) {
  // Floor(L/2) low-resource languages at the tail.
  return num_languages - num_languages / 2;
}

double mean_ce(const std::vector<EvalResult>& evals, std::size_t lo,
               std::size_t hi) {
  if (lo >= hi || hi > evals.size())
    throw TrainerError("eval: bad language range");
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += evals[i].ce;
  return s / static_cast<double>(hi - lo);
}

const Snapshot& RunRecord::final_snapshot() const {
  if (snapshots.empty()) throw TrainerError("record: no snapshots");
  return snapshots.back();
}

const ModelSnap& RunRecord::final_model(int label) const {
  for (const ModelSnap& m : final_snapshot().models)
    if (m.label == label) return m;
  throw TrainerError("record: no model labeled " + std::to_string(label));
}

namespace {

enum : std::uint64_t {
  kInitStream = 30,
  kLangStream = 31,
  kCursorStream = 32,
  kTrialRoundStream = 33,
};

// Weight-strategy anchors start here; training weights still start at zero
// until the first update round writes them.
constexpr double kSearchAnchor = 0.1;

struct ModelSlot {
  int slot;   // 0 or 1; fixes every derived stream
  int label;  // 1-based, what reports show
  ModelParams params;
  OptimizerState optimizer;
  SamplingDistribution sampling;
  Rng lang_rng;
  std::vector<BatchCursor> cursors;  // one per language, train split
  DistillWeights weights;            // in effect for the next steps
  DistillWeights anchor;             // search strategies only

  ModelSlot(const TrainConfig& cfg, const MultilingualCorpus& corpus,
            int slot_in, double tau)
      : slot(slot_in),
        label(slot_in + 1),
        params(init_params(cfg.model_dims(),
                           derive_seed(cfg.run_seed, kInitStream,
                                       static_cast<std::uint64_t>(slot_in)))),
        optimizer(cfg.optimizer),
        sampling(temperature_distribution(corpus.train_sizes(), tau)),
        lang_rng(derive_seed(cfg.run_seed, kLangStream,
                             static_cast<std::uint64_t>(slot_in))),
        weights(DistillWeights::zeros(cfg.corpus.num_languages)),
        anchor(DistillWeights::constant(cfg.corpus.num_languages,
                                        kSearchAnchor)) {
    cursors.reserve(corpus.num_languages());
    for (std::size_t l = 0; l < corpus.num_languages(); ++l)
      cursors.emplace_back(corpus, l, Split::kTrain,
                           derive_seed(cfg.run_seed, kCursorStream,
                                       static_cast<std::uint64_t>(slot_in), l));
  }
};

// One training step for one slot against an optional frozen teacher. The
// gradient is returned, not applied; both models step against the same
// pre-update parameters and the updates land afterwards.
GradientMap slot_gradient(const TrainConfig& cfg, ModelSlot& m,
                          const ModelParams* teacher, std::int64_t step) {
  const std::size_t lang = sample_language(m.sampling, m.lang_rng);
  Batch batch = m.cursors[lang].draw(cfg.batch_size);
  const double alpha = m.weights.alpha[lang];

  Tape tape;
  ModelLeaves lv = register_params(tape, m.params);
  NodeId root;
  if (alpha == 0.0 || teacher == nullptr) {
    root = ce_loss(tape, m.params.dims, lv, batch, cfg.label_smoothing);
  } else {
    RealArray trows = teacher_rows(*teacher, batch);
    root = pmd_loss(tape, m.params.dims, lv, batch, trows, alpha,
                    cfg.label_smoothing);
  }
  const double loss = tape.forward(root);
  if (!std::isfinite(loss))
    throw TrainAbortError("training aborted: non-finite loss at step " +
                          std::to_string(step));
  return tape.backward(root);
}

void slot_apply(ModelSlot& m, const GradientMap& grads, std::int64_t step) {
  auto params = param_list(m.params);
  try {
    m.optimizer.apply(params, grads);
  } catch (const OptimizerError& e) {
    throw TrainAbortError("training aborted at step " + std::to_string(step) +
                          ": " + e.what());
  }
}

Snapshot make_snapshot(std::int64_t step, double mu,
                       const std::vector<ModelSlot*>& slots,
                       const MultilingualCorpus& corpus) {
  Snapshot snap;
  snap.step = step;
  snap.mu = mu;
  for (const ModelSlot* m : slots) {
    ModelSnap ms;
    ms.label = m->label;
    ms.eval = evaluate(m->params, corpus);
    ms.alpha = m->weights.alpha;
    snap.models.push_back(std::move(ms));
  }
  return snap;
}

}  // namespace

RunRecord train_pareto(const TrainConfig& config) {
  config.validate();
  MultilingualCorpus corpus = MultilingualCorpus::generate(config.corpus);
  const std::size_t langs = corpus.num_languages();

  ModelSlot a(config, corpus, 0, config.tau_a);
  ModelSlot b(config, corpus, 1, config.tau_b);
  std::vector<ModelSlot*> slots{&a, &b};

  RunRecord rec;
  rec.config = config;
  rec.labels = {a.label, b.label};

  const std::int64_t t_max = config.max_steps();
  const std::int64_t interval = config.resolved_update_interval();
  rec.snapshots.push_back(make_snapshot(0, 0.0, slots, corpus));

  std::int64_t round = 0;
  for (std::int64_t t = 1; t <= t_max; ++t) {
    // Teachers are the partner's pre-step parameters: both gradients are
    // computed before either update is applied.
    GradientMap ga = slot_gradient(config, a, &b.params, t);
    GradientMap gb = slot_gradient(config, b, &a.params, t);
    slot_apply(a, ga, t);
    slot_apply(b, gb, t);

    const bool update_now = t % interval == 0;
    const bool snapshot_now = update_now || t == t_max;
    if (!snapshot_now) continue;

    double mu = 0.0;
    if (update_now) {
      ++round;
      switch (config.strategy) {
        case StrategyKind::kUni: {
          auto eva = evaluate(a.params, corpus);
          auto evb = evaluate(b.params, corpus);
          std::vector<double> ca(langs), cb(langs);
          for (std::size_t l = 0; l < langs; ++l) {
            ca[l] = eva[l].ce;
            cb[l] = evb[l].ce;
          }
          auto [wa, wb] = uni_update(ca, cb, config.alpha_hyper);
          a.weights = wa;
          b.weights = wb;
          break;
        }
        case StrategyKind::kBi:
          a.weights = bi_update(langs, config.alpha_hyper);
          b.weights = a.weights;
          break;
        case StrategyKind::kLsmd:
          a.weights = lsmd_weights(DistillWeights{config.fixed_alpha}, langs);
          b.weights = a.weights;
          break;
        case StrategyKind::kAuto:
        case StrategyKind::kDynamicMd: {
          mu = step_size(t, t_max, config.scheduler);
          for (ModelSlot* m : slots) {
            const ModelSlot* partner = m == &a ? &b : &a;
            TrialSetup setup;
            setup.corpus = &corpus;
            setup.optimizer = config.optimizer;
            setup.batch_size = config.batch_size;
            setup.label_smoothing = config.label_smoothing;
            setup.order_seed =
                derive_seed(config.run_seed, kTrialRoundStream,
                            static_cast<std::uint64_t>(m->slot),
                            static_cast<std::uint64_t>(round));
            TrialEvaluator ev =
                make_trial_evaluator(m->params, partner->params, setup);
            SearchResult res = config.strategy == StrategyKind::kAuto
                                   ? search_subspace(ev, m->anchor, mu)
                                   : search_uniform(ev, m->anchor, mu);
            m->anchor = res.alpha;
            m->weights = res.alpha;
            rec.weight_log.push_back(WeightLogRow{
                round, m->label, t, mu, res.actions, res.alpha.alpha});
          }
          break;
        }
      }
    }
    rec.snapshots.push_back(make_snapshot(t, mu, slots, corpus));
  }

  rec.steps = t_max;
  rec.finals.push_back(std::move(a.params));
  rec.finals.push_back(std::move(b.params));
  return rec;
}

RunRecord train_baseline(const TrainConfig& config, int slot) {
  config.validate();
  if (slot != 0 && slot != 1)
    throw TrainerError("trainer: baseline slot must be 0 or 1");
  MultilingualCorpus corpus = MultilingualCorpus::generate(config.corpus);

  ModelSlot m(config, corpus, slot, slot == 0 ? config.tau_a : config.tau_b);
  std::vector<ModelSlot*> slots{&m};

  RunRecord rec;
  rec.config = config;
  rec.labels = {m.label};

  const std::int64_t t_max = config.max_steps();
  const std::int64_t interval = config.resolved_update_interval();
  rec.snapshots.push_back(make_snapshot(0, 0.0, slots, corpus));

  for (std::int64_t t = 1; t <= t_max; ++t) {
    GradientMap g = slot_gradient(config, m, nullptr, t);
    slot_apply(m, g, t);
    if (t % interval == 0 || t == t_max)
      rec.snapshots.push_back(make_snapshot(t, 0.0, slots, corpus));
  }

  rec.steps = t_max;
  rec.finals.push_back(std::move(m.params));
  return rec;
}

}  // namespace pmd
