#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmd/model.hpp"
#include "pmd/rng.hpp"

namespace pmd {

struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorpusSpec {
  std::size_t num_languages = 4;
  std::size_t alphabet_size = 24;
  std::vector<std::size_t> sizes = {8000, 2000, 400, 80};  // non-increasing
  std::size_t min_len = 4;
  std::size_t max_len = 10;
  double relatedness = 0.7;  // fraction of cipher symbols shared with language 0
  std::size_t valid_size = 64;
  double trial_fraction = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t vocab_size() const { return alphabet_size + num_languages; }
  bool operator==(const CorpusSpec&) const = default;
};

struct SentencePair {
  std::vector<std::int32_t> source, target;
  bool operator==(const SentencePair&) const = default;
};

enum class Split { kTrain, kValid, kTrial };

const char* split_name(Split s);

// Number of trial sentences carved out of a train pool: round(fraction * n),
// never less than one.
std::size_t trial_count(std::size_t train_size, double fraction);

// One synthetic language per cipher: language 0 carries the reference
// bijection over the alphabet, every other language agrees with it on a
// uniformly chosen fraction `relatedness` of symbols and rebinds the rest by
// a uniform random bijection onto the remaining images. Sentence pairs are
// positionwise applications of the cipher.
class MultilingualCorpus {
 public:
  static MultilingualCorpus generate(const CorpusSpec& spec);

  const CorpusSpec& spec() const { return spec_; }
  std::size_t num_languages() const { return spec_.num_languages; }
  std::vector<std::size_t> train_sizes() const;

  const std::vector<std::int32_t>& cipher(std::size_t lang) const;
  std::size_t split_size(std::size_t lang, Split split) const;
  const SentencePair& pair(std::size_t lang, Split split, std::size_t i) const;
  const std::vector<std::uint32_t>& trial_indices(std::size_t lang) const;

  // corpus.tsv (one pair per line) plus corpus.meta.json in `dir`.
  void dump(const std::string& dir) const;
  static MultilingualCorpus load(const std::string& dir);

  // Internal consistency: bijective ciphers, targets matching ciphers, split
  // disjointness, trial index validity. Throws on the first violation.
  void check() const;

 private:
  struct LanguageData {
    std::vector<std::int32_t> cipher;
    std::vector<SentencePair> train, valid;
    std::vector<std::uint32_t> trial;
  };

  CorpusSpec spec_;
  std::vector<LanguageData> langs_;
};

// Without-replacement batches over one (language, split) pool. Each cycle
// reshuffles with this cursor's own stream; the last batch of a cycle is
// clipped to whatever remains rather than wrapping around.
class BatchCursor {
 public:
  BatchCursor(const MultilingualCorpus& corpus, std::size_t lang, Split split,
              std::uint64_t seed);

  Batch draw(std::size_t batch_size);
  std::size_t remaining_in_cycle() const { return order_.size() - pos_; }

 private:
  const MultilingualCorpus* corpus_;
  std::size_t lang_;
  Split split_;
  Rng rng_;
  std::vector<std::uint32_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace pmd
