#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmd/array.hpp"
#include "pmd/tape.hpp"

namespace pmd {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelDims {
  std::size_t vocab = 0;      // alphabet plus one tag slot per language
  std::size_t embed = 0;
  std::size_t hidden = 0;
  std::size_t languages = 0;

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

// Stable parameter ids, declaration order. Checkpoints and optimizers rely
// on this order never changing.
enum ParamIds : ParamId {
  kTokenEmbedding = 0,
  kLanguageEmbedding,
  kHiddenWeight,
  kHiddenBias,
  kOutputWeight,
  kOutputBias,
  kParamCount,
};

// Per-token translator: x = tok_emb[w] + lang_emb[l], h = tanh(x W1 + b1),
// logits = h W2 + b2. Each source position is mapped independently; the
// language embedding is the only conditioning signal.
struct ModelParams {
  ModelDims dims;
  RealArray token_embedding;     // vocab x embed
  RealArray language_embedding;  // languages x embed
  RealArray hidden_weight;       // embed x hidden
  RealArray hidden_bias;         // 1 x hidden
  RealArray output_weight;       // hidden x vocab
  RealArray output_bias;         // 1 x vocab

  std::size_t parameter_count() const;
};

// All weights i.i.d. uniform on [-0.1, 0.1] from the given stream seed.
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);

// Parameter enumeration in id order, for optimizer updates.
std::vector<std::pair<ParamId, RealArray*>> param_list(ModelParams& p);

// One batch: a single language, paired source/target sentences of equal
// length. Token ids index the shared vocabulary.
struct Batch {
  std::int32_t language = 0;
  std::vector<std::vector<std::int32_t>> sources;
  std::vector<std::vector<std::int32_t>> targets;

  std::size_t total_tokens() const;
  void validate(const ModelDims& dims) const;
};

struct ModelLeaves {
  std::array<NodeId, kParamCount> node;
};

// Registers the six parameter arrays as tape leaves (ids = ParamIds).
ModelLeaves register_params(Tape& tape, const ModelParams& p);

// Same graph inputs as register_params but as constants: forward passes work,
// no gradients flow. Used for evaluation and for frozen teachers.
ModelLeaves register_constants(Tape& tape, const ModelParams& p);

// Builds logits (total_tokens x vocab) for every source position.
NodeId build_logits(Tape& tape, const ModelDims& dims, const ModelLeaves& lv,
                    const Batch& batch);

// log_softmax(build_logits(...)).
NodeId build_log_probs(Tape& tape, const ModelDims& dims,
                       const ModelLeaves& lv, const Batch& batch);

// Forward-only evaluation paths (no gradient bookkeeping kept around).
RealArray log_prob_rows(const ModelParams& p, const Batch& batch);

// Row-stochastic predictive distribution, one row per source position.
RealArray predict_distribution(const ModelParams& p, const Batch& batch);

// Binary checkpoint, bit-exact round trip. Little-endian on disk.
void save_checkpoint(const ModelParams& p, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace pmd
