#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ualab/errors.hpp"
#include "ualab/matrix.hpp"

namespace ualab {

// Fixed span of one clip in seconds. Feature row t of a video describes the
// one-second window starting at (t - 1) * clip_stride.
inline constexpr double kClipSeconds = 1.0;

enum class IntentLabel { Intentional = 0, Transitional = 1, Unintentional = 2 };
enum class Split { PretrainUnlabeled, LabeledTrain, LabeledTest };

const char* to_string(IntentLabel label);
const char* to_string(Split split);
Split split_from_string(const std::string& s);

struct ClipSpec {
  std::string video_id;
  int index = 1;  // 1-based feature row
  double start = 0.0;
  double duration = kClipSeconds;
};

struct VideoRecord {
  std::string id;
  Matrix features;  // n clips x d_in
  double clip_stride = 0.25;
  std::optional<double> transition;
  Split split = Split::PretrainUnlabeled;

  int n_clips() const { return static_cast<int>(features.rows); }
  int feature_dim() const { return static_cast<int>(features.cols); }

  // Time at which the last clip window ends.
  double end_time() const {
    return (features.rows == 0 ? 0.0
                               : (static_cast<double>(features.rows) - 1.0) *
                                         clip_stride +
                                     kClipSeconds);
  }
};

// Pretraining view of a video: deliberately has no transition field, so the
// pretraining path cannot read annotations even by accident.
struct UnlabeledVideo {
  std::string id;
  Matrix features;
  double clip_stride = 0.25;

  int n_clips() const { return static_cast<int>(features.rows); }
};

UnlabeledVideo to_unlabeled(const VideoRecord& video);

// Classifies a clip window against the annotated transition time. Ties:
// a clip ending exactly at t_a is Intentional, one starting exactly at t_a is
// Unintentional, so the three regions partition the start axis.
IntentLabel label_clip(double start, double duration, double transition_time);

struct LabeledClip {
  ClipSpec clip;
  IntentLabel label = IntentLabel::Intentional;
};

// Tiles [0, end - window] with the given stride and labels each window.
// The stride must be a positive integer multiple of the video's feature grid.
std::vector<LabeledClip> extract_eval_clips(const VideoRecord& video,
                                            double stride = 0.25,
                                            double window = kClipSeconds);

struct AnticipationPair {
  ClipSpec current;
  IntentLabel future_label = IntentLabel::Intentional;
};

// Pairs each clip with the label of the clip exactly `horizon` seconds later;
// clips without such a successor are dropped.
std::vector<AnticipationPair> anticipation_pairs(
    const std::vector<LabeledClip>& clips, double stride,
    double horizon = 1.5);

// Line-delimited JSON: one object per video with fields
// id, clip_stride, transition, split, features.
void write_videos(const std::string& path,
                  const std::vector<VideoRecord>& videos);
std::vector<VideoRecord> read_videos(const std::string& path);

// Videos of one split. The pretrain split comes back with the transition
// field absent regardless of what is stored on disk.
std::vector<VideoRecord> load_split(const std::string& path, Split split);

// Annotation-free pool for pretraining.
std::vector<UnlabeledVideo> load_pretrain_pool(const std::string& path);

}  // namespace ualab
