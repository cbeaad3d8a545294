#pragma once

#include <string>
#include <vector>

#include "ualab/datamodel.hpp"
#include "ualab/matrix.hpp"
#include "ualab/rng.hpp"

namespace ualab {

enum class NegativeScope { Global, Local };

const char* to_string(NegativeScope scope);
NegativeScope scope_from_string(const std::string& s);

// Clip indices are 1-based positions within one video.
struct Triplet {
  std::string video_id;
  int anchor = 0;
  int positive = 0;
  int negative = 0;
};

// Raw clip features of K triplets, one triplet per distinct video, arranged
// as ({anchor}, {positive}, {negative}) row blocks.
struct Batch {
  std::vector<Triplet> triplets;
  Matrix anchors;    // K x d_in
  Matrix positives;  // K x d_in
  Matrix negatives;  // K x d_in

  int size() const { return static_cast<int>(triplets.size()); }
};

// Immediate temporal neighbors of t, clamped to [1, n].
std::vector<int> positive_candidates(int t, int n);

// Clips at distance >= 3 from t (Global), additionally capped at distance 5
// (Local). Clips at distance 2 form the margin zone and are never negatives.
// May be empty; the caller decides what an empty set means.
std::vector<int> negative_candidates(int t, int n, NegativeScope scope);

// True when some anchor in [1, n] has both candidate sets nonempty.
bool admits_triplet(int n, NegativeScope scope);

// Uniform anchor among admissible anchors, then uniform positive and uniform
// negative from that anchor's candidate sets.
Triplet sample_triplet(const UnlabeledVideo& video, NegativeScope scope,
                       Rng& rng);

// One triplet per video, features gathered from the video records.
Batch assemble_batch(const std::vector<const UnlabeledVideo*>& videos,
                     NegativeScope scope, Rng& rng);

}  // namespace ualab
