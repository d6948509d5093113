#include "pmd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pmd {

namespace {

enum : std::uint64_t {
  kCipherStream = 1,
  kTrainStream = 2,
  kValidStream = 3,
  kTrialStream = 4,
};

}  // namespace

void CorpusSpec::validate() const {
  if (num_languages < 2)
    throw CorpusError("corpus: need at least two languages");
  if (alphabet_size < 2)
    throw CorpusError("corpus: alphabet must have at least two symbols");
  if (sizes.size() != num_languages)
    throw CorpusError("corpus: sizes list must have one entry per language");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw CorpusError("corpus: empty training pool");
    if (i > 0 && sizes[i] > sizes[i - 1])
      throw CorpusError("corpus: sizes must be non-increasing");
  }
  if (min_len < 1 || min_len > max_len)
    throw CorpusError("corpus: need 1 <= min_len <= max_len");
  if (!(relatedness >= 0.0 && relatedness <= 1.0))
    throw CorpusError("corpus: relatedness must lie in [0, 1]");
  if (valid_size < 1) throw CorpusError("corpus: empty validation split");
  if (!(trial_fraction > 0.0 && trial_fraction <= 1.0))
    throw CorpusError("corpus: trial fraction must lie in (0, 1]");
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTrial: return "trial";
  }
  return "?";
}

std::size_t trial_count(std::size_t train_size, double fraction) {
  const auto n = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(train_size)));
  return std::max<std::size_t>(1, n);
}

namespace {

std::vector<std::int32_t> identity_perm(std::size_t n) {
  std::vector<std::int32_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<std::int32_t>(i);
  return p;
}

SentencePair make_pair(Rng& rng, const CorpusSpec& spec,
                       const std::vector<std::int32_t>& cipher) {
  const std::size_t len =
      spec.min_len + rng.index(spec.max_len - spec.min_len + 1);
  SentencePair pr;
  pr.source.resize(len);
  pr.target.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    pr.source[i] = static_cast<std::int32_t>(rng.index(spec.alphabet_size));
    pr.target[i] = cipher[static_cast<std::size_t>(pr.source[i])];
  }
  return pr;
}

}  // namespace

MultilingualCorpus MultilingualCorpus::generate(const CorpusSpec& spec) {
  spec.validate();
  MultilingualCorpus c;
  c.spec_ = spec;
  c.langs_.resize(spec.num_languages);
  const std::size_t a = spec.alphabet_size;

  // Reference cipher, then related ciphers sharing round(r*A) bindings.
  {
    Rng rng(derive_seed(spec.seed, kCipherStream, 0));
    auto p = identity_perm(a);
    rng.shuffle(p);
    c.langs_[0].cipher = std::move(p);
  }
  const auto shared = static_cast<std::size_t>(
      std::llround(spec.relatedness * static_cast<double>(a)));
  for (std::size_t ell = 1; ell < spec.num_languages; ++ell) {
    Rng rng(derive_seed(spec.seed, kCipherStream, ell));
    auto picks = identity_perm(a);
    rng.shuffle(picks);
    std::vector<bool> in_shared(a, false);
    for (std::size_t i = 0; i < shared; ++i)
      in_shared[static_cast<std::size_t>(picks[i])] = true;

    std::vector<std::int32_t> cipher(a, -1);
    std::vector<std::int32_t> rest_syms, rest_images;
    for (std::size_t s = 0; s < a; ++s) {
      if (in_shared[s]) {
        cipher[s] = c.langs_[0].cipher[s];
      } else {
        rest_syms.push_back(static_cast<std::int32_t>(s));
        rest_images.push_back(c.langs_[0].cipher[s]);
      }
    }
    rng.shuffle(rest_images);
    for (std::size_t i = 0; i < rest_syms.size(); ++i)
      cipher[static_cast<std::size_t>(rest_syms[i])] = rest_images[i];
    c.langs_[ell].cipher = std::move(cipher);
  }

  for (std::size_t ell = 0; ell < spec.num_languages; ++ell) {
    LanguageData& ld = c.langs_[ell];
    {
      Rng rng(derive_seed(spec.seed, kTrainStream, ell));
      ld.train.reserve(spec.sizes[ell]);
      for (std::size_t i = 0; i < spec.sizes[ell]; ++i)
        ld.train.push_back(make_pair(rng, spec, ld.cipher));
    }
    {
      Rng rng(derive_seed(spec.seed, kValidStream, ell));
      std::set<std::vector<std::int32_t>> seen;
      for (const auto& p : ld.train) seen.insert(p.source);
      std::size_t attempts = 0;
      const std::size_t cap = 1000 * spec.valid_size + 1000;
      while (ld.valid.size() < spec.valid_size) {
        if (++attempts > cap)
          throw CorpusError(
              "corpus: cannot build a validation split disjoint from train "
              "for language " +
              std::to_string(ell));
        SentencePair p = make_pair(rng, spec, ld.cipher);
        if (seen.insert(p.source).second) ld.valid.push_back(std::move(p));
      }
    }
    {
      Rng rng(derive_seed(spec.seed, kTrialStream, ell));
      auto order = identity_perm(spec.sizes[ell]);
      rng.shuffle(order);
      const std::size_t n = trial_count(spec.sizes[ell], spec.trial_fraction);
      ld.trial.assign(order.begin(), order.begin() + static_cast<long>(n));
      std::sort(ld.trial.begin(), ld.trial.end());
    }
  }
  c.check();
  return c;
}

std::vector<std::size_t> MultilingualCorpus::train_sizes() const {
  return spec_.sizes;
}

const std::vector<std::int32_t>& MultilingualCorpus::cipher(
    std::size_t lang) const {
  if (lang >= langs_.size())
    throw CorpusError("corpus: language index out of range");
  return langs_[lang].cipher;
}

std::size_t MultilingualCorpus::split_size(std::size_t lang,
                                           Split split) const {
  if (lang >= langs_.size())
    throw CorpusError("corpus: language index out of range");
  switch (split) {
    case Split::kTrain: return langs_[lang].train.size();
    case Split::kValid: return langs_[lang].valid.size();
    case Split::kTrial: return langs_[lang].trial.size();
  }
  return 0;
}

const SentencePair& MultilingualCorpus::pair(std::size_t lang, Split split,
                                             std::size_t i) const {
  if (lang >= langs_.size())
    throw CorpusError("corpus: language index out of range");
  const LanguageData& ld = langs_[lang];
  switch (split) {
    case Split::kTrain:
      if (i >= ld.train.size()) break;
      return ld.train[i];
    case Split::kValid:
      if (i >= ld.valid.size()) break;
      return ld.valid[i];
    case Split::kTrial:
      if (i >= ld.trial.size()) break;
      return ld.train[ld.trial[i]];
  }
  throw CorpusError("corpus: sentence index out of range");
}

const std::vector<std::uint32_t>& MultilingualCorpus::trial_indices(
    std::size_t lang) const {
  if (lang >= langs_.size())
    throw CorpusError("corpus: language index out of range");
  return langs_[lang].trial;
}

void MultilingualCorpus::check() const {
  spec_.validate();
  if (langs_.size() != spec_.num_languages)
    throw CorpusError("corpus: language count mismatch");
  const std::size_t a = spec_.alphabet_size;
  const auto shared = static_cast<std::size_t>(
      std::llround(spec_.relatedness * static_cast<double>(a)));

  for (std::size_t ell = 0; ell < langs_.size(); ++ell) {
    const LanguageData& ld = langs_[ell];
    if (ld.cipher.size() != a)
      throw CorpusError("corpus: cipher size mismatch for language " +
                        std::to_string(ell));
    std::vector<bool> hit(a, false);
    for (std::int32_t v : ld.cipher) {
      if (v < 0 || static_cast<std::size_t>(v) >= a ||
          hit[static_cast<std::size_t>(v)])
        throw CorpusError("corpus: cipher for language " +
                          std::to_string(ell) + " is not a bijection");
      hit[static_cast<std::size_t>(v)] = true;
    }
    if (ell > 0) {
      std::size_t agree = 0;
      for (std::size_t s = 0; s < a; ++s)
        if (ld.cipher[s] == langs_[0].cipher[s]) ++agree;
      if (agree < shared)
        throw CorpusError("corpus: language " + std::to_string(ell) +
                          " shares fewer symbols than relatedness requires");
    }

    if (ld.train.size() != spec_.sizes[ell])
      throw CorpusError("corpus: train size mismatch for language " +
                        std::to_string(ell));
    if (ld.valid.size() != spec_.valid_size)
      throw CorpusError("corpus: valid size mismatch for language " +
                        std::to_string(ell));

    std::set<std::vector<std::int32_t>> train_sources;
    auto check_pair = [&](const SentencePair& p, const char* where) {
      if (p.source.size() != p.target.size() ||
          p.source.size() < spec_.min_len || p.source.size() > spec_.max_len)
        throw CorpusError(std::string("corpus: malformed ") + where +
                          " sentence in language " + std::to_string(ell));
      for (std::size_t i = 0; i < p.source.size(); ++i) {
        const std::int32_t s = p.source[i];
        if (s < 0 || static_cast<std::size_t>(s) >= a ||
            p.target[i] != ld.cipher[static_cast<std::size_t>(s)])
          throw CorpusError(std::string("corpus: ") + where +
                            " target does not match the cipher in language " +
                            std::to_string(ell));
      }
    };
    for (const auto& p : ld.train) {
      check_pair(p, "train");
      train_sources.insert(p.source);
    }
    for (const auto& p : ld.valid) {
      check_pair(p, "valid");
      if (train_sources.count(p.source))
        throw CorpusError("corpus: validation sentence also in train for "
                          "language " +
                          std::to_string(ell));
    }

    if (ld.trial.size() != trial_count(ld.train.size(), spec_.trial_fraction))
      throw CorpusError("corpus: trial size mismatch for language " +
                        std::to_string(ell));
    for (std::size_t i = 0; i < ld.trial.size(); ++i) {
      if (ld.trial[i] >= ld.train.size() ||
          (i > 0 && ld.trial[i] <= ld.trial[i - 1]))
        throw CorpusError("corpus: trial indices must be strictly increasing "
                          "train positions");
    }
  }
}

namespace {

std::string join_tokens(const std::vector<std::int32_t>& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(toks[i]);
  }
  return s;
}

std::vector<std::int32_t> parse_tokens(const std::string& field) {
  std::vector<std::int32_t> out;
  std::istringstream is(field);
  long v;
  while (is >> v) out.push_back(static_cast<std::int32_t>(v));
  return out;
}

}  // namespace

void MultilingualCorpus::dump(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::ofstream tsv(fs::path(dir) / "corpus.tsv");
  if (!tsv) throw CorpusError("corpus: cannot write corpus.tsv in " + dir);
  for (std::size_t ell = 0; ell < langs_.size(); ++ell) {
    for (Split split : {Split::kTrain, Split::kValid}) {
      const std::size_t n = split_size(ell, split);
      for (std::size_t i = 0; i < n; ++i) {
        const SentencePair& p = pair(ell, split, i);
        tsv << ell << '\t' << split_name(split) << '\t'
            << join_tokens(p.source) << '\t' << join_tokens(p.target) << '\n';
      }
    }
  }
  if (!tsv) throw CorpusError("corpus: write failed for corpus.tsv");

  nlohmann::json meta;
  meta["version"] = 1;
  meta["num_languages"] = spec_.num_languages;
  meta["alphabet_size"] = spec_.alphabet_size;
  meta["sizes"] = spec_.sizes;
  meta["min_len"] = spec_.min_len;
  meta["max_len"] = spec_.max_len;
  meta["relatedness"] = spec_.relatedness;
  meta["valid_size"] = spec_.valid_size;
  meta["trial_fraction"] = spec_.trial_fraction;
  meta["seed"] = spec_.seed;
  for (const auto& ld : langs_) {
    meta["ciphers"].push_back(ld.cipher);
    meta["trial_indices"].push_back(ld.trial);
  }
  std::ofstream mj(fs::path(dir) / "corpus.meta.json");
  if (!mj)
    throw CorpusError("corpus: cannot write corpus.meta.json in " + dir);
  mj << meta.dump(2) << '\n';
}

MultilingualCorpus MultilingualCorpus::load(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mj(fs::path(dir) / "corpus.meta.json");
  if (!mj) throw CorpusError("corpus: cannot open corpus.meta.json in " + dir);
  nlohmann::json meta;
  try {
    mj >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError(std::string("corpus: bad metadata: ") + e.what());
  }

  MultilingualCorpus c;
  try {
    if (meta.at("version").get<int>() != 1)
      throw CorpusError("corpus: unsupported metadata version");
    c.spec_.num_languages = meta.at("num_languages").get<std::size_t>();
    c.spec_.alphabet_size = meta.at("alphabet_size").get<std::size_t>();
    c.spec_.sizes = meta.at("sizes").get<std::vector<std::size_t>>();
    c.spec_.min_len = meta.at("min_len").get<std::size_t>();
    c.spec_.max_len = meta.at("max_len").get<std::size_t>();
    c.spec_.relatedness = meta.at("relatedness").get<double>();
    c.spec_.valid_size = meta.at("valid_size").get<std::size_t>();
    c.spec_.trial_fraction = meta.at("trial_fraction").get<double>();
    c.spec_.seed = meta.at("seed").get<std::uint64_t>();
    c.langs_.resize(c.spec_.num_languages);
    const auto& ciphers = meta.at("ciphers");
    const auto& trials = meta.at("trial_indices");
    if (ciphers.size() != c.spec_.num_languages ||
        trials.size() != c.spec_.num_languages)
      throw CorpusError("corpus: metadata language count mismatch");
    for (std::size_t ell = 0; ell < c.spec_.num_languages; ++ell) {
      c.langs_[ell].cipher = ciphers[ell].get<std::vector<std::int32_t>>();
      c.langs_[ell].trial = trials[ell].get<std::vector<std::uint32_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError(std::string("corpus: bad metadata: ") + e.what());
  }

  std::ifstream tsv(fs::path(dir) / "corpus.tsv");
  if (!tsv) throw CorpusError("corpus: cannot open corpus.tsv in " + dir);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(tsv, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<std::string, 4> fields;
    std::size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      const std::size_t tab = line.find('\t', start);
      if (f < 3 && tab == std::string::npos)
        throw CorpusError("corpus: malformed line " + std::to_string(lineno) +
                          " in corpus.tsv");
      fields[static_cast<std::size_t>(f)] =
          line.substr(start, tab == std::string::npos ? tab : tab - start);
      start = tab + 1;
    }
    std::size_t ell;
    try {
      ell = std::stoul(fields[0]);
    } catch (const std::exception&) {
      throw CorpusError("corpus: bad language id at line " +
                        std::to_string(lineno));
    }
    if (ell >= c.langs_.size())
      throw CorpusError("corpus: language id out of range at line " +
                        std::to_string(lineno));
    SentencePair p{parse_tokens(fields[2]), parse_tokens(fields[3])};
    if (fields[1] == "train")
      c.langs_[ell].train.push_back(std::move(p));
    else if (fields[1] == "valid")
      c.langs_[ell].valid.push_back(std::move(p));
    else
      throw CorpusError("corpus: unknown split at line " +
                        std::to_string(lineno));
  }
  c.check();
  return c;
}

BatchCursor::BatchCursor(const MultilingualCorpus& corpus, std::size_t lang,
                         Split split, std::uint64_t seed)
    : corpus_(&corpus), lang_(lang), split_(split), rng_(seed) {
  const std::size_t n = corpus.split_size(lang, split);
  if (n == 0) throw CorpusError("corpus: cannot iterate an empty split");
  order_.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    order_[i] = static_cast<std::uint32_t>(i);
  rng_.shuffle(order_);
}

Batch BatchCursor::draw(std::size_t batch_size) {
  if (batch_size == 0)
    throw CorpusError("corpus: batch size must be positive");
  if (pos_ == order_.size()) {
    rng_.shuffle(order_);
    pos_ = 0;
  }
  const std::size_t take = std::min(batch_size, order_.size() - pos_);
  Batch b;
  b.language = static_cast<std::int32_t>(lang_);
  b.sources.reserve(take);
  b.targets.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const SentencePair& p = corpus_->pair(lang_, split_, order_[pos_ + i]);
    b.sources.push_back(p.source);
    b.targets.push_back(p.target);
  }
  pos_ += take;
  return b;
}

}  // namespace pmd
