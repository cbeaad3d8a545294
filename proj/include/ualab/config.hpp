#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ualab/evaluation.hpp"
#include "ualab/synthgen.hpp"

namespace ualab {

// Everything an experiment run depends on. Serializes losslessly to JSON;
// the digest covers only result-affecting fields (output paths and the
// thread cap are excluded), so equal digests mean equal artifacts.
struct RunConfig {
  GenConfig gen;
  SplitCounts counts;
  ModelDims dims;
  double temperature = 0.1;
  PretrainOptions pretrain;
  EvalOptions eval;
  double labeled_fraction = 1.0;
  std::uint64_t seed = 1;

  std::string out_dir;  // not part of the digest
  int threads = 0;      // 0 = library default; not part of the digest
};

std::string to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& text);

// Result-affecting fields only, canonical key order. This is what the digest
// hashes and what artifacts embed.
std::string to_canonical_json(const RunConfig& cfg);

RunConfig load_config_file(const std::string& path);

// Digest of the canonical JSON of the result-affecting fields plus the seed.
std::string config_digest(const RunConfig& cfg);

}  // namespace ualab
