#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "ualab/sampling.hpp"

using namespace ualab;

namespace {

UnlabeledVideo make_video(int n, int d = 4, std::uint64_t seed = 5) {
  UnlabeledVideo video;
  video.id = "v" + std::to_string(n);
  video.clip_stride = 0.25;
  video.features = Matrix(static_cast<std::size_t>(n),
                          static_cast<std::size_t>(d));
  Rng rng(seed);
  for (auto& v : video.features.v) v = rng.normal();
  return video;
}

// Brute-force filter over [1, n] with the distance predicates.
std::vector<int> brute_negatives(int t, int n, NegativeScope scope) {
  std::vector<int> out;
  for (int idx = 1; idx <= n; ++idx) {
    const int dist = std::abs(idx - t);
    if (dist < 3) continue;
    if (scope == NegativeScope::Local && dist > 5) continue;
    out.push_back(idx);
  }
  return out;
}

std::vector<int> brute_positives(int t, int n) {
  std::vector<int> out;
  for (int idx = 1; idx <= n; ++idx) {
    if (std::abs(idx - t) == 1) out.push_back(idx);
  }
  return out;
}

// 99th percentile of the chi-square distribution via Wilson-Hilferty.
double chi2_crit_99(double df) {
  const double z = 2.3263478740408408;
  const double a = 2.0 / (9.0 * df);
  const double c = 1.0 - a + z * std::sqrt(a);
  return df * c * c * c;
}

}  // namespace

TEST_CASE("positive candidates clamp at the boundaries") {
  CHECK(positive_candidates(5, 12) == std::vector<int>{4, 6});
  CHECK(positive_candidates(1, 12) == std::vector<int>{2});
  CHECK(positive_candidates(12, 12) == std::vector<int>{11});
}

TEST_CASE("negative candidates exclude the margin zone") {
  CHECK(negative_candidates(5, 12, NegativeScope::Global) ==
        std::vector<int>{1, 2, 8, 9, 10, 11, 12});
  CHECK(negative_candidates(5, 12, NegativeScope::Local) ==
        std::vector<int>{1, 2, 8, 9, 10});
  CHECK(negative_candidates(2, 4, NegativeScope::Global).empty());
}

TEST_CASE("candidate sets equal brute-force enumeration for n <= 30") {
  for (int n = 1; n <= 30; ++n) {
    for (int t = 1; t <= n; ++t) {
      for (const auto scope : {NegativeScope::Global, NegativeScope::Local}) {
        CHECK(negative_candidates(t, n, scope) == brute_negatives(t, n, scope));
      }
      CHECK(positive_candidates(t, n) == brute_positives(t, n));
    }
  }
}

TEST_CASE("n = 4 admits exactly two anchor/negative combinations") {
  const UnlabeledVideo video = make_video(4);
  std::set<std::tuple<int, int, int>> seen;
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Triplet t = sample_triplet(video, NegativeScope::Global, rng);
    seen.insert({t.anchor, t.positive, t.negative});
  }
  // brute-force enumeration: anchors 2 and 3 have no negative at distance 3
  const std::set<std::tuple<int, int, int>> expected = {{1, 2, 4}, {4, 3, 1}};
  CHECK(seen == expected);
}

TEST_CASE("videos without any admissible anchor are rejected") {
  const UnlabeledVideo video = make_video(3);
  Rng rng(7);
  CHECK_THROWS_AS(sample_triplet(video, NegativeScope::Global, rng),
                  VideoTooShort);
  CHECK_FALSE(admits_triplet(3, NegativeScope::Global));
  CHECK(admits_triplet(4, NegativeScope::Global));
  CHECK(admits_triplet(4, NegativeScope::Local));
}

TEST_CASE("sampled triplets follow the anchor/positive/negative law") {
  // Expected counts come from the factored sampling law: anchor uniform over
  // admissible anchors, then positive and negative uniform per anchor.
  const int n = 20;
  const int draws = 100000;
  const UnlabeledVideo video = make_video(n);

  for (const auto scope : {NegativeScope::Global, NegativeScope::Local}) {
    std::vector<std::tuple<int, int, int>> cells;
    std::map<std::tuple<int, int, int>, double> expected;
    std::vector<int> anchors;
    for (int t = 1; t <= n; ++t) {
      if (!positive_candidates(t, n).empty() &&
          !negative_candidates(t, n, scope).empty()) {
        anchors.push_back(t);
      }
    }
    for (int t : anchors) {
      const auto pos = positive_candidates(t, n);
      const auto neg = negative_candidates(t, n, scope);
      for (int p : pos) {
        for (int ng : neg) {
          cells.emplace_back(t, p, ng);
          expected[{t, p, ng}] = double(draws) / double(anchors.size()) /
                                 double(pos.size()) / double(neg.size());
        }
      }
    }

    std::map<std::tuple<int, int, int>, int> observed;
    Rng rng(scope == NegativeScope::Global ? 101 : 202);
    for (int i = 0; i < draws; ++i) {
      const Triplet t = sample_triplet(video, scope, rng);
      observed[{t.anchor, t.positive, t.negative}] += 1;
    }

    double chi2 = 0.0;
    for (const auto& cell : cells) {
      const double e = expected[cell];
      const double o = observed[cell];
      chi2 += (o - e) * (o - e) / e;
    }
    // every observed triplet must be an admissible cell
    std::size_t total = 0;
    for (const auto& [cell, count] : observed) {
      CHECK(expected.count(cell) == 1);
      total += static_cast<std::size_t>(count);
    }
    CHECK(total == draws);
    const double df = static_cast<double>(cells.size() - 1);
    CHECK(chi2 < chi2_crit_99(df));
  }
}

TEST_CASE("fuzzed draws never touch the margin zone") {
  Rng meta(99);
  Rng rng(100);
  for (int i = 0; i < 200000; ++i) {
    const int n = 4 + static_cast<int>(meta.uniform_int(27));
    const auto scope =
        meta.coin() ? NegativeScope::Global : NegativeScope::Local;
    const UnlabeledVideo video = make_video(n, 2, 1);
    const Triplet t = sample_triplet(video, scope, rng);
    const int dist = std::abs(t.negative - t.anchor);
    CHECK(dist >= 3);
    if (scope == NegativeScope::Local) CHECK(dist <= 5);
    CHECK(std::abs(t.positive - t.anchor) == 1);
    CHECK(t.anchor >= 1);
    CHECK(t.anchor <= n);
    CHECK(t.positive >= 1);
    CHECK(t.positive <= n);
    CHECK(t.negative >= 1);
    CHECK(t.negative <= n);
  }
}

TEST_CASE("assemble_batch gathers one triplet per video") {
  std::vector<UnlabeledVideo> videos;
  for (int i = 0; i < 5; ++i) {
    videos.push_back(make_video(10 + i, 4, 40 + std::uint64_t(i)));
    videos.back().id = "video-" + std::to_string(i);
  }
  std::vector<const UnlabeledVideo*> ptrs;
  for (const auto& v : videos) ptrs.push_back(&v);

  Rng rng(17);
  const Batch batch = assemble_batch(ptrs, NegativeScope::Global, rng);
  REQUIRE(batch.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(batch.triplets[i].video_id == videos[i].id);
    const auto check_row = [&](const Matrix& block, int index) {
      for (std::size_t c = 0; c < block.cols; ++c) {
        CHECK(block.at(i, c) ==
              videos[i].features.at(static_cast<std::size_t>(index - 1), c));
      }
    };
    check_row(batch.anchors, batch.triplets[i].anchor);
    check_row(batch.positives, batch.triplets[i].positive);
    check_row(batch.negatives, batch.triplets[i].negative);
  }

  // single-video batch
  std::vector<const UnlabeledVideo*> one = {&videos[0]};
  Rng rng_one(18);
  CHECK(assemble_batch(one, NegativeScope::Global, rng_one).size() == 1);

  // determinism
  Rng rng_a(19), rng_b(19);
  const Batch a = assemble_batch(ptrs, NegativeScope::Local, rng_a);
  const Batch b = assemble_batch(ptrs, NegativeScope::Local, rng_b);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.triplets[i].anchor == b.triplets[i].anchor);
    CHECK(a.triplets[i].positive == b.triplets[i].positive);
    CHECK(a.triplets[i].negative == b.triplets[i].negative);
  }
  CHECK(a.anchors.v == b.anchors.v);
}
