#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmd/trainer.hpp"

namespace pmd {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunSettings {
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  // True when the config pins corpus.seed; otherwise each run reseeds the
  // corpus with its own run seed, making seeds fully independent replicas.
  bool corpus_seed_pinned = false;
};

// Strict parse: unknown keys, malformed types or out-of-range values all
// raise ConfigError naming the offending key.
RunSettings parse_config_text(const std::string& text);
RunSettings load_config_file(const std::string& path);

// Full resolved settings, stable key order; reparsing yields the same
// settings.
std::string serialize_config(const RunSettings& settings);

}  // namespace pmd
