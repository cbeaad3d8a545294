#include "ualab/sampling.hpp"

#include <algorithm>
#include <cstring>

namespace ualab {

const char* to_string(NegativeScope scope) {
  return scope == NegativeScope::Global ? "global" : "local";
}

NegativeScope scope_from_string(const std::string& s) {
  if (s == "global") return NegativeScope::Global;
  if (s == "local") return NegativeScope::Local;
  throw InvalidConfig("unknown negative scope: " + s);
}

std::vector<int> positive_candidates(int t, int n) {
  std::vector<int> out;
  if (t - 1 >= 1) out.push_back(t - 1);
  if (t + 1 <= n) out.push_back(t + 1);
  return out;
}

std::vector<int> negative_candidates(int t, int n, NegativeScope scope) {
  const int max_dist = scope == NegativeScope::Local ? 5 : n;
  std::vector<int> out;
  for (int idx = std::max(1, t - max_dist); idx <= t - 3; ++idx) {
    out.push_back(idx);
  }
  for (int idx = t + 3; idx <= std::min(n, t + max_dist); ++idx) {
    out.push_back(idx);
  }
  return out;
}

bool admits_triplet(int n, NegativeScope scope) {
  for (int t = 1; t <= n; ++t) {
    if (!positive_candidates(t, n).empty() &&
        !negative_candidates(t, n, scope).empty()) {
      return true;
    }
  }
  return false;
}

Triplet sample_triplet(const UnlabeledVideo& video, NegativeScope scope,
                       Rng& rng) {
  const int n = video.n_clips();
  std::vector<int> anchors;
  for (int t = 1; t <= n; ++t) {
    if (!positive_candidates(t, n).empty() &&
        !negative_candidates(t, n, scope).empty()) {
      anchors.push_back(t);
    }
  }
  if (anchors.empty()) {
    throw VideoTooShort("video " + video.id + " (n=" + std::to_string(n) +
                        ") admits no triplet");
  }
  Triplet triplet;
  triplet.video_id = video.id;
  triplet.anchor = rng.pick(anchors);
  triplet.positive = rng.pick(positive_candidates(triplet.anchor, n));
  triplet.negative = rng.pick(negative_candidates(triplet.anchor, n, scope));
  return triplet;
}

Batch assemble_batch(const std::vector<const UnlabeledVideo*>& videos,
                     NegativeScope scope, Rng& rng) {
  if (videos.empty()) throw InvalidConfig("batch needs at least one video");
  const std::size_t d_in = videos.front()->features.cols;
  Batch batch;
  batch.triplets.reserve(videos.size());
  batch.anchors = Matrix(videos.size(), d_in);
  batch.positives = Matrix(videos.size(), d_in);
  batch.negatives = Matrix(videos.size(), d_in);

  for (std::size_t i = 0; i < videos.size(); ++i) {
    const UnlabeledVideo& video = *videos[i];
    if (video.features.cols != d_in) {
      throw ShapeMismatch("video " + video.id + " feature dim mismatch");
    }
    const Triplet triplet = sample_triplet(video, scope, rng);
    const auto gather = [&](int index, Matrix& dst) {
      const double* src =
          video.features.row(static_cast<std::size_t>(index - 1));
      std::memcpy(dst.row(i), src, d_in * sizeof(double));
    };
    gather(triplet.anchor, batch.anchors);
    gather(triplet.positive, batch.positives);
    gather(triplet.negative, batch.negatives);
    batch.triplets.push_back(triplet);
  }
  return batch;
}

}  // namespace ualab
