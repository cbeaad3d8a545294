#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ualab/datamodel.hpp"
#include "ualab/rng.hpp"

namespace ualab {

// Latent trajectory dimension. Small enough for fast tests, large enough
// that the random linear map to feature space is nontrivial.
inline constexpr int kLatentDim = 8;

struct GenConfig {
  int d_in = 32;
  std::pair<int, int> n_range{12, 24};  // clips per video, inclusive
  std::pair<double, double> transition_quantile_range{0.3, 0.7};
  double noise_sigma = 1.0;
  double regime_shift = 1.0;  // 0 disables the regime change entirely
  double clip_stride = 0.25;
  std::uint64_t seed = 1;
};

void validate(const GenConfig& cfg);

struct SplitCounts {
  int pretrain = 600;
  int labeled_train = 200;
  int labeled_test = 200;

  int total() const { return pretrain + labeled_train + labeled_test; }
};

// Feature sequences follow a smooth latent trajectory: the latent state
// drifts by small steps along a per-video direction, and each clip feature is
// the window average of the latent samples it covers, mapped through a fixed
// per-dataset random linear map, plus isotropic noise. At the clip containing
// the transition the drift direction is re-drawn (biased towards a
// dataset-level post-transition direction) and the step size scales by
// (1 + regime_shift).
VideoRecord generate_video(const GenConfig& cfg, Rng& rng);

// Deterministic dataset with three disjoint splits. Every video carries its
// annotation; the pretraining path must go through the unlabeled view.
std::vector<VideoRecord> generate_dataset(const GenConfig& cfg,
                                          const SplitCounts& counts);

}  // namespace ualab
