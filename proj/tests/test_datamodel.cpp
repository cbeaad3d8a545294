#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ualab/datamodel.hpp"
#include "ualab/rng.hpp"

using namespace ualab;

namespace {

VideoRecord make_video(int n, int d, double stride, double t_a, Split split,
                       std::uint64_t seed = 3) {
  VideoRecord video;
  video.id = "test-video";
  video.clip_stride = stride;
  video.transition = t_a;
  video.split = split;
  video.features = Matrix(static_cast<std::size_t>(n),
                          static_cast<std::size_t>(d));
  Rng rng(seed);
  for (auto& v : video.features.v) v = rng.normal();
  return video;
}

// Independent restatement of the three label regions; the test oracle.
int oracle_region(double start, double end, double t_a) {
  const bool intentional = end <= t_a;
  const bool transitional = start < t_a && t_a < end;
  const bool unintentional = start >= t_a;
  CHECK(int(intentional) + int(transitional) + int(unintentional) == 1);
  if (intentional) return 0;
  if (transitional) return 1;
  return 2;
}

}  // namespace

TEST_CASE("label_clip boundary conventions") {
  CHECK(label_clip(2.0, 1.0, 3.5) == IntentLabel::Intentional);
  CHECK(label_clip(3.0, 1.0, 3.5) == IntentLabel::Transitional);
  CHECK(label_clip(3.5, 1.0, 3.5) == IntentLabel::Unintentional);
  // end exactly at the transition stays intentional
  CHECK(label_clip(2.5, 1.0, 3.5) == IntentLabel::Intentional);
  CHECK_THROWS_AS(label_clip(1.0, 0.0, 3.5), NonPositiveDuration);
  CHECK_THROWS_AS(label_clip(1.0, -0.5, 3.5), NonPositiveDuration);
}

TEST_CASE("label_clip matches exhaustive rule application on a grid") {
  const double duration = 1.0;
  for (int ti = 0; ti < 100; ++ti) {
    const double t_a = 0.07 * ti;
    int last_region = 0;
    for (int si = 0; si < 100; ++si) {
      const double start = 0.06 * si;
      const int region = oracle_region(start, start + duration, t_a);
      CHECK(static_cast<int>(label_clip(start, duration, t_a)) == region);
      // monotone in start for fixed t_a
      CHECK(region >= last_region);
      last_region = region;
    }
  }
}

TEST_CASE("extract_eval_clips tiles the video") {
  // end time (n-1)*stride + 1s; n = 9 gives a 3.0 s video
  const VideoRecord v3 = make_video(9, 4, 0.25, 1.5, Split::LabeledTrain);
  CHECK(v3.end_time() == doctest::Approx(3.0));
  const auto clips = extract_eval_clips(v3);
  REQUIRE(clips.size() == 9);
  for (std::size_t k = 0; k < clips.size(); ++k) {
    CHECK(clips[k].clip.start == doctest::Approx(0.25 * double(k)));
    CHECK(clips[k].clip.index == int(k) + 1);
  }
  CHECK(clips.front().clip.start == 0.0);
  CHECK(clips.back().clip.start == doctest::Approx(2.0));

  const VideoRecord v1 = make_video(1, 4, 0.25, 0.5, Split::LabeledTrain);
  CHECK(extract_eval_clips(v1).size() == 1);
}

TEST_CASE("extract_eval_clips labels match per-clip re-application") {
  // 6.0 s video: n = 21 at 0.25 s stride
  const VideoRecord video = make_video(21, 4, 0.25, 3.1, Split::LabeledTrain);
  CHECK(video.end_time() == doctest::Approx(6.0));
  const auto clips = extract_eval_clips(video);
  int last = 0;
  for (const auto& clip : clips) {
    CHECK(clip.label == label_clip(clip.clip.start, clip.clip.duration, 3.1));
    const int region = oracle_region(
        clip.clip.start, clip.clip.start + clip.clip.duration, 3.1);
    CHECK(static_cast<int>(clip.label) == region);
    CHECK(region >= last);
    last = region;
  }
}

TEST_CASE("extract_eval_clips count follows the tiling rule") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(40));
    const VideoRecord video = make_video(n, 3, 0.25, 0.4, Split::LabeledTrain);
    const double end = video.end_time();
    const auto clips = extract_eval_clips(video, 0.25, 1.0);
    const auto expected =
        static_cast<std::size_t>(std::floor((end - 1.0) / 0.25 + 1e-9)) + 1;
    CHECK(clips.size() == expected);
  }
}

TEST_CASE("extract_eval_clips error paths") {
  VideoRecord video = make_video(8, 4, 0.25, 1.0, Split::LabeledTrain);
  video.transition.reset();
  CHECK_THROWS_AS(extract_eval_clips(video), MissingAnnotation);

  const VideoRecord short_video =
      make_video(2, 4, 0.25, 0.5, Split::LabeledTrain);
  CHECK_THROWS_AS(extract_eval_clips(short_video, 0.25, 2.0), VideoTooShort);

  const VideoRecord misaligned =
      make_video(8, 4, 0.25, 1.0, Split::LabeledTrain);
  CHECK_THROWS_AS(extract_eval_clips(misaligned, 0.3, 1.0), InvalidConfig);
}

TEST_CASE("anticipation_pairs drops clips without a successor") {
  const VideoRecord video = make_video(9, 4, 0.25, 1.5, Split::LabeledTrain);
  const auto clips = extract_eval_clips(video);

  const auto pairs = anticipation_pairs(clips, 0.25, 1.5);
  REQUIRE(pairs.size() == 3);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    CHECK(pairs[k].current.start == doctest::Approx(0.25 * double(k)));
    CHECK(pairs[k].future_label == clips[k + 6].label);
  }

  const std::vector<LabeledClip> six(clips.begin(), clips.begin() + 6);
  CHECK(anticipation_pairs(six, 0.25, 1.5).empty());

  CHECK_THROWS_AS(anticipation_pairs(clips, 0.25, 0.3),
                  HorizonNotMultipleOfStride);
}

TEST_CASE("anticipation_pairs equals an index-shifted label lookup") {
  const VideoRecord video = make_video(20, 4, 0.25, 2.4, Split::LabeledTrain);
  const auto clips = extract_eval_clips(video);
  const auto pairs = anticipation_pairs(clips, 0.25, 1.5);
  REQUIRE(pairs.size() == clips.size() - 6);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    CHECK(pairs[k].future_label == clips[k + 6].label);  // shift oracle
    CHECK(pairs[k].current.index == clips[k].clip.index);
  }
  // horizon 0 pairs every clip with its own label
  const auto self_pairs = anticipation_pairs(clips, 0.25, 0.0);
  REQUIRE(self_pairs.size() == clips.size());
  for (std::size_t k = 0; k < clips.size(); ++k) {
    CHECK(self_pairs[k].future_label == clips[k].label);
  }
}

TEST_CASE("jsonl round trip preserves records") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "ualab_datamodel_test";
  fs::create_directories(dir);
  const std::string path = (dir / "dataset.jsonl").string();

  std::vector<VideoRecord> videos;
  videos.push_back(make_video(8, 4, 0.25, 1.2, Split::PretrainUnlabeled, 1));
  videos.push_back(make_video(12, 4, 0.25, 2.0, Split::LabeledTrain, 2));
  videos.push_back(make_video(5, 4, 0.25, 1.0, Split::LabeledTest, 3));
  videos[0].id = "a";
  videos[1].id = "b";
  videos[2].id = "c";
  write_videos(path, videos);

  const auto loaded = read_videos(path);
  REQUIRE(loaded.size() == videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) {
    CHECK(loaded[i].id == videos[i].id);
    CHECK(loaded[i].split == videos[i].split);
    CHECK(loaded[i].clip_stride == videos[i].clip_stride);
    CHECK(loaded[i].transition == videos[i].transition);
    CHECK(loaded[i].features.v == videos[i].features.v);
  }

  // the pretrain split comes back with the annotation stripped
  const auto pretrain = load_split(path, Split::PretrainUnlabeled);
  REQUIRE(pretrain.size() == 1);
  CHECK_FALSE(pretrain[0].transition.has_value());
  const auto labeled = load_split(path, Split::LabeledTrain);
  REQUIRE(labeled.size() == 1);
  CHECK(labeled[0].transition.has_value());

  const auto pool = load_pretrain_pool(path);
  REQUIRE(pool.size() == 1);
  CHECK(pool[0].id == "a");
  CHECK(pool[0].features.v == videos[0].features.v);

  CHECK_THROWS_AS(read_videos((dir / "missing.jsonl").string()),
                  DatasetNotFound);
  fs::remove_all(dir);
}
