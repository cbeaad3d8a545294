#include "ualab/datamodel.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace ualab {

namespace {
constexpr double kGridEps = 1e-9;
}

const char* to_string(IntentLabel label) {
  switch (label) {
    case IntentLabel::Intentional: return "intentional";
    case IntentLabel::Transitional: return "transitional";
    case IntentLabel::Unintentional: return "unintentional";
  }
  return "?";
}

const char* to_string(Split split) {
  switch (split) {
    case Split::PretrainUnlabeled: return "pretrain_unlabeled";
    case Split::LabeledTrain: return "labeled_train";
    case Split::LabeledTest: return "labeled_test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "pretrain_unlabeled") return Split::PretrainUnlabeled;
  if (s == "labeled_train") return Split::LabeledTrain;
  if (s == "labeled_test") return Split::LabeledTest;
  throw IoError("unknown split: " + s);
}

UnlabeledVideo to_unlabeled(const VideoRecord& video) {
  return UnlabeledVideo{video.id, video.features, video.clip_stride};
}

IntentLabel label_clip(double start, double duration, double transition_time) {
  if (!(duration > 0.0)) {
    throw NonPositiveDuration("clip duration must be positive, got " +
                              std::to_string(duration));
  }
  const double end = start + duration;
  if (end <= transition_time) return IntentLabel::Intentional;
  if (start >= transition_time) return IntentLabel::Unintentional;
  return IntentLabel::Transitional;
}

std::vector<LabeledClip> extract_eval_clips(const VideoRecord& video,
                                            double stride, double window) {
  if (!video.transition.has_value()) {
    throw MissingAnnotation("video " + video.id + " has no transition time");
  }
  if (!(stride > 0.0) || !(window > 0.0)) {
    throw InvalidConfig("stride and window must be positive");
  }
  const double ratio = stride / video.clip_stride;
  const int step = static_cast<int>(std::llround(ratio));
  if (step < 1 || std::abs(ratio - step) > kGridEps) {
    throw InvalidConfig("eval stride " + std::to_string(stride) +
                        " is not a multiple of the clip grid " +
                        std::to_string(video.clip_stride));
  }
  const double end = video.end_time();
  if (end + kGridEps < window) {
    throw VideoTooShort("video " + video.id + " is shorter than one window");
  }
  const int count =
      static_cast<int>(std::floor((end - window) / stride + kGridEps)) + 1;
  const double t_a = *video.transition;

  std::vector<LabeledClip> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    ClipSpec clip;
    clip.video_id = video.id;
    clip.index = 1 + k * step;
    clip.start = static_cast<double>(k) * stride;
    clip.duration = window;
    out.push_back({clip, label_clip(clip.start, window, t_a)});
  }
  return out;
}

std::vector<AnticipationPair> anticipation_pairs(
    const std::vector<LabeledClip>& clips, double stride, double horizon) {
  if (!(stride > 0.0)) throw InvalidConfig("stride must be positive");
  if (horizon < 0.0) throw InvalidConfig("horizon must be nonnegative");
  const double ratio = horizon / stride;
  const int steps = static_cast<int>(std::llround(ratio));
  if (std::abs(ratio - steps) > kGridEps) {
    throw HorizonNotMultipleOfStride(
        "horizon " + std::to_string(horizon) +
        " is not an integer multiple of stride " + std::to_string(stride));
  }
  std::vector<AnticipationPair> out;
  if (steps < static_cast<int>(clips.size())) {
    out.reserve(clips.size() - static_cast<std::size_t>(steps));
  }
  for (std::size_t k = 0; k + static_cast<std::size_t>(steps) < clips.size();
       ++k) {
    out.push_back({clips[k].clip, clips[k + static_cast<std::size_t>(steps)].label});
  }
  return out;
}

namespace {

nlohmann::json video_to_json(const VideoRecord& video) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t r = 0; r < video.features.rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < video.features.cols; ++c) {
      row.push_back(video.features.at(r, c));
    }
    features.push_back(std::move(row));
  }
  nlohmann::json j;
  j["id"] = video.id;
  j["clip_stride"] = video.clip_stride;
  if (video.transition.has_value()) {
    j["transition"] = *video.transition;
  } else {
    j["transition"] = nullptr;
  }
  j["split"] = to_string(video.split);
  j["features"] = std::move(features);
  return j;
}

VideoRecord video_from_json(const nlohmann::json& j) {
  VideoRecord video;
  video.id = j.at("id").get<std::string>();
  video.clip_stride = j.at("clip_stride").get<double>();
  if (!j.at("transition").is_null()) {
    video.transition = j.at("transition").get<double>();
  }
  video.split = split_from_string(j.at("split").get<std::string>());
  const auto& features = j.at("features");
  const std::size_t rows = features.size();
  const std::size_t cols = rows == 0 ? 0 : features.at(0).size();
  video.features = Matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = features.at(r);
    if (row.size() != cols) {
      throw IoError("ragged feature rows in video " + video.id);
    }
    for (std::size_t c = 0; c < cols; ++c) {
      video.features.at(r, c) = row.at(c).get<double>();
    }
  }
  return video;
}

}  // namespace

void write_videos(const std::string& path,
                  const std::vector<VideoRecord>& videos) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& video : videos) {
    out << video_to_json(video).dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<VideoRecord> read_videos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetNotFound("dataset not found: " + path);
  std::vector<VideoRecord> videos;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      videos.push_back(video_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return videos;
}

std::vector<VideoRecord> load_split(const std::string& path, Split split) {
  std::vector<VideoRecord> out;
  for (auto& video : read_videos(path)) {
    if (video.split != split) continue;
    if (split == Split::PretrainUnlabeled) video.transition.reset();
    out.push_back(std::move(video));
  }
  return out;
}

std::vector<UnlabeledVideo> load_pretrain_pool(const std::string& path) {
  std::vector<UnlabeledVideo> out;
  for (auto& video : read_videos(path)) {
    if (video.split != Split::PretrainUnlabeled) continue;
    out.push_back(UnlabeledVideo{std::move(video.id),
                                 std::move(video.features),
                                 video.clip_stride});
  }
  return out;
}

}  // namespace ualab
