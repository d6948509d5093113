#include "pmd/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pmd/rng.hpp"

namespace pmd {

void ModelDims::validate() const {
  if (vocab < 2) throw ModelError("model: vocab size must be at least 2");
  if (embed < 2 || hidden < 2)
    throw ModelError("model: embedding and hidden dims must be at least 2");
  if (languages < 1) throw ModelError("model: need at least one language");
  if (vocab < languages)
    throw ModelError("model: vocab must cover the language tag block");
}

std::size_t ModelParams::parameter_count() const {
  return token_embedding.size() + language_embedding.size() +
         hidden_weight.size() + hidden_bias.size() + output_weight.size() +
         output_bias.size();
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  auto fill = [&rng](std::vector<std::size_t> shape) {
    RealArray a = RealArray::zeros(std::move(shape));
    for (double& v : a.data) v = rng.uniform(-0.1, 0.1);
    return a;
  };
  ModelParams p;
  p.dims = dims;
  p.token_embedding = fill({dims.vocab, dims.embed});
  p.language_embedding = fill({dims.languages, dims.embed});
  p.hidden_weight = fill({dims.embed, dims.hidden});
  p.hidden_bias = fill({1, dims.hidden});
  p.output_weight = fill({dims.hidden, dims.vocab});
  p.output_bias = fill({1, dims.vocab});
  return p;
}

std::vector<std::pair<ParamId, RealArray*>> param_list(ModelParams& p) {
  return {{kTokenEmbedding, &p.token_embedding},
          {kLanguageEmbedding, &p.language_embedding},
          {kHiddenWeight, &p.hidden_weight},
          {kHiddenBias, &p.hidden_bias},
          {kOutputWeight, &p.output_weight},
          {kOutputBias, &p.output_bias}};
}

std::size_t Batch::total_tokens() const {
  std::size_t n = 0;
  for (const auto& s : sources) n += s.size();
  return n;
}

void Batch::validate(const ModelDims& dims) const {
  if (language < 0 || static_cast<std::size_t>(language) >= dims.languages)
    throw ModelError("batch: language id " + std::to_string(language) +
                     " out of range");
  if (sources.empty()) throw ModelError("batch: empty batch");
  if (sources.size() != targets.size())
    throw ModelError("batch: source/target sentence counts differ");
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (sources[s].empty())
      throw ModelError("batch: empty sentence at index " + std::to_string(s));
    if (sources[s].size() != targets[s].size())
      throw ModelError("batch: source/target length mismatch at sentence " +
                       std::to_string(s));
    for (std::size_t i = 0; i < sources[s].size(); ++i) {
      for (std::int32_t tok : {sources[s][i], targets[s][i]})
        if (tok < 0 || static_cast<std::size_t>(tok) >= dims.vocab)
          throw ModelError("batch: token id " + std::to_string(tok) +
                           " out of range at sentence " + std::to_string(s) +
                           " position " + std::to_string(i));
    }
  }
}

ModelLeaves register_params(Tape& tape, const ModelParams& p) {
  ModelLeaves lv;
  lv.node[kTokenEmbedding] = tape.leaf(p.token_embedding, kTokenEmbedding);
  lv.node[kLanguageEmbedding] =
      tape.leaf(p.language_embedding, kLanguageEmbedding);
  lv.node[kHiddenWeight] = tape.leaf(p.hidden_weight, kHiddenWeight);
  lv.node[kHiddenBias] = tape.leaf(p.hidden_bias, kHiddenBias);
  lv.node[kOutputWeight] = tape.leaf(p.output_weight, kOutputWeight);
  lv.node[kOutputBias] = tape.leaf(p.output_bias, kOutputBias);
  return lv;
}

ModelLeaves register_constants(Tape& tape, const ModelParams& p) {
  ModelLeaves lv;
  lv.node[kTokenEmbedding] = tape.constant(p.token_embedding);
  lv.node[kLanguageEmbedding] = tape.constant(p.language_embedding);
  lv.node[kHiddenWeight] = tape.constant(p.hidden_weight);
  lv.node[kHiddenBias] = tape.constant(p.hidden_bias);
  lv.node[kOutputWeight] = tape.constant(p.output_weight);
  lv.node[kOutputBias] = tape.constant(p.output_bias);
  return lv;
}

NodeId build_logits(Tape& tape, const ModelDims& dims, const ModelLeaves& lv,
                    const Batch& batch) {
  batch.validate(dims);
  std::vector<std::int32_t> tokens;
  tokens.reserve(batch.total_tokens());
  for (const auto& s : batch.sources)
    tokens.insert(tokens.end(), s.begin(), s.end());
  const std::size_t n = tokens.size();
  const std::vector<std::int32_t> lang_rows(n, batch.language);
  const std::vector<std::int32_t> zeros(n, 0);

  // Biases are stored 1 x width; a zero-index lookup broadcasts them to the
  // batch and routes their gradient back through the scatter rule.
  NodeId x = tape.add(tape.row_lookup(lv.node[kTokenEmbedding], tokens),
                      tape.row_lookup(lv.node[kLanguageEmbedding], lang_rows));
  NodeId h = tape.tanh(
      tape.add(tape.matmul(x, lv.node[kHiddenWeight]),
               tape.row_lookup(lv.node[kHiddenBias], zeros)));
  return tape.add(tape.matmul(h, lv.node[kOutputWeight]),
                  tape.row_lookup(lv.node[kOutputBias], zeros));
}

NodeId build_log_probs(Tape& tape, const ModelDims& dims,
                       const ModelLeaves& lv, const Batch& batch) {
  return tape.log_softmax(build_logits(tape, dims, lv, batch));
}

RealArray log_prob_rows(const ModelParams& p, const Batch& batch) {
  Tape tape;
  ModelLeaves lv = register_params(tape, p);
  NodeId lp = build_log_probs(tape, p.dims, lv, batch);
  tape.forward(tape.sum(lp));
  return tape.value(lp);
}

RealArray predict_distribution(const ModelParams& p, const Batch& batch) {
  RealArray lp = log_prob_rows(p, batch);
  for (double& v : lp.data) v = std::exp(v);
  return lp;
}

namespace {

constexpr char kMagic[8] = {'P', 'M', 'D', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
  put_u64(os, std::bit_cast<std::uint64_t>(d));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw ModelError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw ModelError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& is) {
  return std::bit_cast<double>(get_u64(is));
}

}  // namespace

void save_checkpoint(const ModelParams& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw ModelError("checkpoint: cannot open for writing: " + path);
  os.write(kMagic, 8);
  put_u32(os, kVersion);
  put_u32(os, 0);  // reserved
  put_u64(os, p.dims.vocab);
  put_u64(os, p.dims.embed);
  put_u64(os, p.dims.hidden);
  put_u64(os, p.dims.languages);
  const RealArray* arrays[] = {&p.token_embedding, &p.language_embedding,
                               &p.hidden_weight,   &p.hidden_bias,
                               &p.output_weight,   &p.output_bias};
  for (const RealArray* a : arrays)
    for (double v : a->data) put_f64(os, v);
  if (!os) throw ModelError("checkpoint: write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelError("checkpoint: cannot open: " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw ModelError("checkpoint: not a model checkpoint: " + path);
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw ModelError("checkpoint: unsupported version " +
                     std::to_string(version));
  get_u32(is);  // reserved
  ModelDims dims;
  dims.vocab = get_u64(is);
  dims.embed = get_u64(is);
  dims.hidden = get_u64(is);
  dims.languages = get_u64(is);
  dims.validate();

  ModelParams p;
  p.dims = dims;
  auto read_arr = [&is](std::vector<std::size_t> shape) {
    RealArray a = RealArray::zeros(std::move(shape));
    for (double& v : a.data) v = get_f64(is);
    return a;
  };
  p.token_embedding = read_arr({dims.vocab, dims.embed});
  p.language_embedding = read_arr({dims.languages, dims.embed});
  p.hidden_weight = read_arr({dims.embed, dims.hidden});
  p.hidden_bias = read_arr({1, dims.hidden});
  p.output_weight = read_arr({dims.hidden, dims.vocab});
  p.output_bias = read_arr({1, dims.vocab});
  if (is.peek() != std::char_traits<char>::eof())
    throw ModelError("checkpoint: trailing bytes: " + path);
  return p;
}

}  // namespace pmd
