#include "pmd/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace pmd {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void check_keys(const json& obj, const char* section,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ConfigError(std::string("config: ") + section +
                      " must be an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError(std::string("config: unknown key '") + item.key() +
                        "' in " + section);
  }
}

template <typename T>
T get_field(const json& obj, const char* section, const char* key,
            const T& fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for ") + section + "." +
                      key);
  }
}

void parse_corpus(const json& j, CorpusSpec& spec, bool& seed_pinned) {
  check_keys(j, "corpus",
             {"languages", "alphabet", "sizes", "min_len", "max_len",
              "relatedness", "valid_size", "trial_fraction", "seed"});
  spec.num_languages = get_field(j, "corpus", "languages", spec.num_languages);
  spec.alphabet_size = get_field(j, "corpus", "alphabet", spec.alphabet_size);
  spec.sizes = get_field(j, "corpus", "sizes", spec.sizes);
  spec.min_len = get_field(j, "corpus", "min_len", spec.min_len);
  spec.max_len = get_field(j, "corpus", "max_len", spec.max_len);
  spec.relatedness = get_field(j, "corpus", "relatedness", spec.relatedness);
  spec.valid_size = get_field(j, "corpus", "valid_size", spec.valid_size);
  spec.trial_fraction =
      get_field(j, "corpus", "trial_fraction", spec.trial_fraction);
  if (j.contains("seed")) {
    spec.seed = get_field<std::uint64_t>(j, "corpus", "seed", spec.seed);
    seed_pinned = true;
  }
}

void parse_model(const json& j, TrainConfig& cfg) {
  check_keys(j, "model", {"embed_dim", "hidden_dim"});
  cfg.embed_dim = get_field(j, "model", "embed_dim", cfg.embed_dim);
  cfg.hidden_dim = get_field(j, "model", "hidden_dim", cfg.hidden_dim);
}

void parse_optimizer(const json& j, OptimizerSpec& spec) {
  check_keys(j, "optimizer",
             {"kind", "learning_rate", "beta1", "beta2", "epsilon"});
  const std::string kind =
      get_field<std::string>(j, "optimizer", "kind", "adam");
  if (kind == "adam")
    spec.kind = OptimizerKind::kAdam;
  else if (kind == "sgd")
    spec.kind = OptimizerKind::kSgd;
  else
    throw ConfigError("config: optimizer.kind must be 'adam' or 'sgd'");
  spec.learning_rate =
      get_field(j, "optimizer", "learning_rate", spec.learning_rate);
  spec.beta1 = get_field(j, "optimizer", "beta1", spec.beta1);
  spec.beta2 = get_field(j, "optimizer", "beta2", spec.beta2);
  spec.epsilon = get_field(j, "optimizer", "epsilon", spec.epsilon);
}

void parse_training(const json& j, TrainConfig& cfg) {
  check_keys(j, "training",
             {"tau_a", "tau_b", "strategy", "alpha", "fixed_alpha",
              "scheduler", "batch_size", "epochs", "update_interval",
              "label_smoothing"});
  cfg.tau_a = get_field(j, "training", "tau_a", cfg.tau_a);
  cfg.tau_b = get_field(j, "training", "tau_b", cfg.tau_b);
  if (j.contains("strategy")) {
    try {
      cfg.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    } catch (const json::exception&) {
      throw ConfigError("config: bad value for training.strategy");
    } catch (const StrategyError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  cfg.alpha_hyper = get_field(j, "training", "alpha", cfg.alpha_hyper);
  cfg.fixed_alpha = get_field(j, "training", "fixed_alpha", cfg.fixed_alpha);
  if (j.contains("scheduler")) {
    try {
      cfg.scheduler = scheduler_from_name(j.at("scheduler").get<std::string>());
    } catch (const json::exception&) {
      throw ConfigError("config: bad value for training.scheduler");
    } catch (const StrategyError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  cfg.batch_size = get_field(j, "training", "batch_size", cfg.batch_size);
  cfg.epochs = get_field(j, "training", "epochs", cfg.epochs);
  cfg.update_interval =
      get_field(j, "training", "update_interval", cfg.update_interval);
  cfg.label_smoothing =
      get_field(j, "training", "label_smoothing", cfg.label_smoothing);
}

}  // namespace

RunSettings parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  check_keys(root, "the top level",
             {"version", "corpus", "model", "optimizer", "training", "seeds"});
  const int version = get_field(root, "the top level", "version", 1);
  if (version != 1)
    throw ConfigError("config: unsupported version " +
                      std::to_string(version));

  RunSettings s;
  if (root.contains("corpus"))
    parse_corpus(root.at("corpus"), s.train.corpus, s.corpus_seed_pinned);
  if (root.contains("model")) parse_model(root.at("model"), s.train);
  if (root.contains("optimizer"))
    parse_optimizer(root.at("optimizer"), s.train.optimizer);
  if (root.contains("training")) parse_training(root.at("training"), s.train);
  if (root.contains("seeds")) {
    s.seeds =
        get_field(root, "the top level", "seeds", std::vector<std::uint64_t>{});
    if (s.seeds.empty())
      throw ConfigError("config: seeds must not be empty");
    std::set<std::uint64_t> uniq(s.seeds.begin(), s.seeds.end());
    if (uniq.size() != s.seeds.size())
      throw ConfigError("config: seeds must be distinct");
  }

  try {
    s.train.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return s;
}

RunSettings load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string serialize_config(const RunSettings& s) {
  ordered_json j;
  j["version"] = 1;
  auto& c = j["corpus"];
  c["languages"] = s.train.corpus.num_languages;
  c["alphabet"] = s.train.corpus.alphabet_size;
  c["sizes"] = s.train.corpus.sizes;
  c["min_len"] = s.train.corpus.min_len;
  c["max_len"] = s.train.corpus.max_len;
  c["relatedness"] = s.train.corpus.relatedness;
  c["valid_size"] = s.train.corpus.valid_size;
  c["trial_fraction"] = s.train.corpus.trial_fraction;
  if (s.corpus_seed_pinned) c["seed"] = s.train.corpus.seed;
  auto& m = j["model"];
  m["embed_dim"] = s.train.embed_dim;
  m["hidden_dim"] = s.train.hidden_dim;
  auto& o = j["optimizer"];
  o["kind"] = s.train.optimizer.kind == OptimizerKind::kAdam ? "adam" : "sgd";
  o["learning_rate"] = s.train.optimizer.learning_rate;
  o["beta1"] = s.train.optimizer.beta1;
  o["beta2"] = s.train.optimizer.beta2;
  o["epsilon"] = s.train.optimizer.epsilon;
  auto& t = j["training"];
  t["tau_a"] = s.train.tau_a;
  t["tau_b"] = s.train.tau_b;
  t["strategy"] = strategy_name(s.train.strategy);
  t["alpha"] = s.train.alpha_hyper;
  if (!s.train.fixed_alpha.empty()) t["fixed_alpha"] = s.train.fixed_alpha;
  t["scheduler"] = scheduler_name(s.train.scheduler);
  t["batch_size"] = s.train.batch_size;
  t["epochs"] = s.train.epochs;
  t["update_interval"] = s.train.update_interval;
  t["label_smoothing"] = s.train.label_smoothing;
  j["seeds"] = s.seeds;
  return j.dump(2) + "\n";
}

}  // namespace pmd
