#pragma once

#include <cstdint>
#include <vector>

#include "ualab/losses.hpp"

namespace ualab {

struct PretrainOptions {
  int steps = 2000;
  int batch_videos = 16;  // K
  NegativeScope scope = NegativeScope::Global;
  LossMode mode = LossMode::Combined;
  OptKind optimizer = OptKind::Adam;
  double lr = 3e-3;
  std::uint64_t seed = 1;
};

struct StepRecord {
  int step = 0;
  LossReport report;
};

struct PretrainResult {
  ModelParams params;
  std::vector<StepRecord> log;
  int skipped_videos = 0;  // too short to admit a triplet
};

// Self-supervised training on annotation-free videos. Deterministic in
// (pool, dims, temperature, options); videos that admit no triplet are
// skipped up front and counted.
PretrainResult pretrain(const std::vector<UnlabeledVideo>& pool,
                        const ModelDims& dims, double temperature,
                        const PretrainOptions& opts);

// Random encoder with the pretraining init scheme; the untrained control.
ModelParams scratch_params(const ModelDims& dims, double temperature,
                           std::uint64_t seed);

}  // namespace ualab
