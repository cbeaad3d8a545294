#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ualab/losses.hpp"
#include "ualab/pretraining.hpp"

namespace ualab {

inline constexpr int kNumClasses = 3;

enum class Regime { Frozen, Finetuned };

const char* to_string(Regime regime);
Regime regime_from_string(const std::string& s);

// Linear head over backbone features.
struct ProbeParams {
  Matrix w;  // kNumClasses x d_f
  Matrix b;  // kNumClasses x 1

  static ProbeParams zeros(int d_f);
};

struct ProbeOptions {
  int steps = 500;
  double lr = 0.05;           // probe learning rate (full-batch GD)
  double finetune_lr = 0.005; // encoder learning rate when fine-tuning
};

// Flat (feature row, label) set extracted from labeled videos.
struct SampleSet {
  Matrix x;                 // N x d_in
  std::vector<int> labels;  // class ids, 0..2

  std::size_t size() const { return labels.size(); }
};

// Deterministic whole-video subsample: llround(fraction * count) videos,
// at least one, chosen by a seeded shuffle.
std::vector<const VideoRecord*> subsample_videos(
    const std::vector<VideoRecord>& videos, double fraction, Rng& rng);

SampleSet classification_samples(const std::vector<const VideoRecord*>& videos,
                                 double stride, double window);

// (current clip feature -> label of the clip `horizon` seconds later).
// horizon 0 reduces to classification_samples.
SampleSet anticipation_samples(const std::vector<const VideoRecord*>& videos,
                               double stride, double window, double horizon);

// Balanced sample indices: every present class is resampled with replacement
// up to the majority count, deterministically from rng. With
// require_all_classes, an absent class raises MissingClass.
std::vector<std::size_t> balanced_indices(const std::vector<int>& labels,
                                          Rng& rng, bool require_all_classes);

struct FitResult {
  ProbeParams probe;
  ModelParams encoder;  // bit-identical to the input in the Frozen regime
};

// Trains a 3-way softmax probe on class-balanced samples with full-batch
// gradient descent; the Finetuned regime also descends the encoder.
FitResult fit_probe(const ModelParams& encoder, const SampleSet& train,
                    Regime regime, const ProbeOptions& opts, Rng& rng,
                    bool require_all_classes = true);

struct ClassifyResult {
  Matrix probs;                // N x kNumClasses
  std::vector<int> predicted;  // argmax, ties to the lowest class id
  double accuracy = 0.0;
};

ClassifyResult classify(const ProbeParams& probe, const ModelParams& encoder,
                        const SampleSet& samples);

struct LocalizeResult {
  double predicted_time = 0.0;
  std::vector<std::pair<double, bool>> correct_at;  // (threshold, hit)
};

// Slides the classifier over the video's eval clips; the center of the clip
// with the highest transitional probability is the predicted transition
// point, correct at threshold h when |predicted - annotated| <= h. Argmax
// ties go to the earliest clip.
LocalizeResult localize(const ProbeParams& probe, const ModelParams& encoder,
                        const VideoRecord& video,
                        const std::vector<double>& thresholds,
                        double stride = 0.25, double window = kClipSeconds);

struct EvalOptions {
  double stride = 0.25;
  double window = kClipSeconds;
  std::vector<double> thresholds{1.0, 0.25};
  double horizon = 1.5;
  ProbeOptions probe;
};

// Trains an anticipation probe on train pairs (same balancing rule as
// classification, minority classes allowed to be absent) and reports test
// pair accuracy.
double anticipate(const ModelParams& encoder,
                  const std::vector<const VideoRecord*>& train_videos,
                  const std::vector<const VideoRecord*>& test_videos,
                  double horizon, Regime regime, const EvalOptions& opts,
                  Rng& rng);

struct EvalMetrics {
  std::string representation = "pretrained";
  Regime regime = Regime::Frozen;
  double labeled_fraction = 1.0;
  double cls_accuracy = 0.0;
  std::vector<std::pair<double, double>> loc_accuracy_at;
  double ant_accuracy = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

std::string to_json_line(const EvalMetrics& metrics);

// One full protocol pass: classification probe (balanced, subsampled train
// videos), localization with that probe, anticipation with its own probe.
EvalMetrics evaluate_representation(const ModelParams& encoder,
                                    const std::vector<VideoRecord>& train,
                                    const std::vector<VideoRecord>& test,
                                    Regime regime, double labeled_fraction,
                                    const EvalOptions& opts, Rng& rng);

struct AblationCell {
  NegativeScope scope = NegativeScope::Global;
  LossMode mode = LossMode::Combined;
};

struct AblationRow {
  NegativeScope scope = NegativeScope::Global;
  LossMode mode = LossMode::Combined;
  std::uint64_t seed = 0;
  EvalMetrics metrics;
  bool failed = false;
  std::string error;
};

// Pretrains one encoder per (cell, seed) and evaluates the frozen linear
// probe protocol. A failing cell marks its row and the matrix carries on.
std::vector<AblationRow> run_ablation_matrix(
    const std::vector<VideoRecord>& dataset,
    const std::vector<AblationCell>& grid,
    const std::vector<std::uint64_t>& seeds, const ModelDims& dims,
    double temperature, const PretrainOptions& pretrain_opts,
    const EvalOptions& eval_opts, const std::string& config_digest);

}  // namespace ualab
