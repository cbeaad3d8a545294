#include "ualab/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>

#include <json.hpp>

#include "ualab/kernels.hpp"

namespace ualab {

namespace {
constexpr double kTimeEps = 1e-9;
}

const char* to_string(Regime regime) {
  return regime == Regime::Frozen ? "frozen" : "finetuned";
}

Regime regime_from_string(const std::string& s) {
  if (s == "frozen") return Regime::Frozen;
  if (s == "finetuned") return Regime::Finetuned;
  throw InvalidConfig("unknown regime: " + s);
}

ProbeParams ProbeParams::zeros(int d_f) {
  ProbeParams p;
  p.w = Matrix(kNumClasses, static_cast<std::size_t>(d_f));
  p.b = Matrix(kNumClasses, 1);
  return p;
}

std::vector<const VideoRecord*> subsample_videos(
    const std::vector<VideoRecord>& videos, double fraction, Rng& rng) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw InvalidConfig("labeled_fraction must be in (0, 1]");
  }
  std::vector<const VideoRecord*> all;
  all.reserve(videos.size());
  for (const auto& v : videos) all.push_back(&v);
  const auto want = std::clamp<std::size_t>(
      static_cast<std::size_t>(
          std::llround(fraction * static_cast<double>(all.size()))),
      1, all.size());
  if (want == all.size()) return all;
  rng.shuffle(all);
  all.resize(want);
  return all;
}

namespace {

void append_sample(SampleSet& set, std::vector<double>& flat,
                   const VideoRecord& video, int clip_index, int label) {
  const double* row =
      video.features.row(static_cast<std::size_t>(clip_index - 1));
  flat.insert(flat.end(), row, row + video.features.cols);
  set.labels.push_back(label);
}

SampleSet finish(std::vector<double> flat, SampleSet set, std::size_t dim) {
  set.x.rows = set.labels.size();
  set.x.cols = dim;
  set.x.v = std::move(flat);
  return set;
}

}  // namespace

SampleSet classification_samples(const std::vector<const VideoRecord*>& videos,
                                 double stride, double window) {
  SampleSet set;
  std::vector<double> flat;
  std::size_t dim = 0;
  for (const VideoRecord* video : videos) {
    dim = video->features.cols;
    for (const auto& clip : extract_eval_clips(*video, stride, window)) {
      append_sample(set, flat, *video, clip.clip.index,
                    static_cast<int>(clip.label));
    }
  }
  return finish(std::move(flat), std::move(set), dim);
}

SampleSet anticipation_samples(const std::vector<const VideoRecord*>& videos,
                               double stride, double window, double horizon) {
  SampleSet set;
  std::vector<double> flat;
  std::size_t dim = 0;
  for (const VideoRecord* video : videos) {
    dim = video->features.cols;
    const auto clips = extract_eval_clips(*video, stride, window);
    for (const auto& pair : anticipation_pairs(clips, stride, horizon)) {
      append_sample(set, flat, *video, pair.current.index,
                    static_cast<int>(pair.future_label));
    }
  }
  return finish(std::move(flat), std::move(set), dim);
}

std::vector<std::size_t> balanced_indices(const std::vector<int>& labels,
                                          Rng& rng,
                                          bool require_all_classes) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::size_t majority = 0;
  for (const auto& ids : by_class) majority = std::max(majority, ids.size());
  if (majority == 0) throw MissingClass("no labeled samples at all");

  std::vector<std::size_t> out;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& ids = by_class[static_cast<std::size_t>(c)];
    if (ids.empty()) {
      if (require_all_classes) {
        throw MissingClass(std::string("class ") + to_string(IntentLabel(c)) +
                           " absent from labeled data");
      }
      continue;
    }
    out.insert(out.end(), ids.begin(), ids.end());
    for (std::size_t extra = ids.size(); extra < majority; ++extra) {
      out.push_back(ids[static_cast<std::size_t>(rng.uniform_int(ids.size()))]);
    }
  }
  return out;
}

namespace {

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& ids) {
  Matrix out(ids.size(), x.cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::memcpy(out.row(r), x.row(ids[r]), x.cols * sizeof(double));
  }
  return out;
}

// dL/dlogits for mean softmax cross-entropy: (softmax - onehot) / N.
void softmax_ce_grad(const Matrix& logits, const std::vector<int>& labels,
                     Matrix& dlogits) {
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  for (std::size_t s = 0; s < logits.rows; ++s) {
    const double* l = logits.row(s);
    double* d = dlogits.row(s);
    const double max_v = std::max({l[0], l[1], l[2]});
    double total = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      d[c] = std::exp(l[c] - max_v);
      total += d[c];
    }
    for (int c = 0; c < kNumClasses; ++c) {
      d[c] = (d[c] / total -
              (c == labels[s] ? 1.0 : 0.0)) *
             inv_n;
    }
  }
}

}  // namespace

FitResult fit_probe(const ModelParams& encoder, const SampleSet& train,
                    Regime regime, const ProbeOptions& opts, Rng& rng,
                    bool require_all_classes) {
  if (train.size() == 0) throw MissingClass("empty training sample set");
  const auto ids = balanced_indices(train.labels, rng, require_all_classes);
  const Matrix xb = gather_rows(train.x, ids);
  std::vector<int> yb(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) yb[i] = train.labels[ids[i]];

  FitResult result;
  result.encoder = encoder;
  result.probe = ProbeParams::zeros(encoder.dims.d_f);

  Matrix logits(xb.rows, kNumClasses);
  Matrix dlogits(xb.rows, kNumClasses);
  Matrix dw(kNumClasses, static_cast<std::size_t>(encoder.dims.d_f));
  Matrix db(kNumClasses, 1);

  if (regime == Regime::Frozen) {
    Matrix features;
    encode_batch(result.encoder, xb, features);
    for (int step = 0; step < opts.steps; ++step) {
      kernels::linear_forward(features, result.probe.w, result.probe.b,
                              logits);
      softmax_ce_grad(logits, yb, dlogits);
      std::fill(dw.v.begin(), dw.v.end(), 0.0);
      std::fill(db.v.begin(), db.v.end(), 0.0);
      kernels::linear_backward_params(features, dlogits, dw, db);
      for (std::size_t k = 0; k < dw.v.size(); ++k) {
        result.probe.w.v[k] -= opts.lr * dw.v[k];
      }
      for (std::size_t k = 0; k < db.v.size(); ++k) {
        result.probe.b.v[k] -= opts.lr * db.v[k];
      }
    }
    return result;
  }

  EncoderActivations acts;
  Matrix dfeat(xb.rows, static_cast<std::size_t>(encoder.dims.d_f));
  ParamBlock enc_grads = ParamBlock::shaped(encoder.dims);
  for (int step = 0; step < opts.steps; ++step) {
    encode_batch_cached(result.encoder, xb, acts);
    kernels::linear_forward(acts.f, result.probe.w, result.probe.b, logits);
    softmax_ce_grad(logits, yb, dlogits);

    std::fill(dw.v.begin(), dw.v.end(), 0.0);
    std::fill(db.v.begin(), db.v.end(), 0.0);
    kernels::linear_backward_params(acts.f, dlogits, dw, db);
    kernels::linear_backward_input(dlogits, result.probe.w, dfeat);
    enc_grads.zero();
    encode_batch_backward(result.encoder, xb, acts, dfeat, enc_grads);

    for (std::size_t k = 0; k < dw.v.size(); ++k) {
      result.probe.w.v[k] -= opts.lr * dw.v[k];
    }
    for (std::size_t k = 0; k < db.v.size(); ++k) {
      result.probe.b.v[k] -= opts.lr * db.v[k];
    }
    const auto descend = [&](Matrix& p, const Matrix& g) {
      for (std::size_t k = 0; k < p.v.size(); ++k) {
        p.v[k] -= opts.finetune_lr * g.v[k];
      }
    };
    descend(result.encoder.p.enc_w1, enc_grads.enc_w1);
    descend(result.encoder.p.enc_b1, enc_grads.enc_b1);
    descend(result.encoder.p.enc_w2, enc_grads.enc_w2);
    descend(result.encoder.p.enc_b2, enc_grads.enc_b2);
    descend(result.encoder.p.enc_w3, enc_grads.enc_w3);
    descend(result.encoder.p.enc_b3, enc_grads.enc_b3);
  }
  return result;
}

ClassifyResult classify(const ProbeParams& probe, const ModelParams& encoder,
                        const SampleSet& samples) {
  ClassifyResult result;
  Matrix features;
  encode_batch(encoder, samples.x, features);
  Matrix logits(features.rows, kNumClasses);
  kernels::linear_forward(features, probe.w, probe.b, logits);

  result.probs = Matrix(logits.rows, kNumClasses);
  result.predicted.resize(logits.rows);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < logits.rows; ++s) {
    const double* l = logits.row(s);
    double* p = result.probs.row(s);
    const double max_v = std::max({l[0], l[1], l[2]});
    double total = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      p[c] = std::exp(l[c] - max_v);
      total += p[c];
    }
    int best = 0;
    for (int c = 0; c < kNumClasses; ++c) {
      p[c] /= total;
      if (p[c] > p[best]) best = c;  // strict: ties keep the lowest class
    }
    result.predicted[s] = best;
    if (best == samples.labels[s]) ++hits;
  }
  result.accuracy = logits.rows == 0
                        ? 0.0
                        : static_cast<double>(hits) /
                              static_cast<double>(logits.rows);
  return result;
}

LocalizeResult localize(const ProbeParams& probe, const ModelParams& encoder,
                        const VideoRecord& video,
                        const std::vector<double>& thresholds, double stride,
                        double window) {
  const auto clips = extract_eval_clips(video, stride, window);
  SampleSet set;
  std::vector<double> flat;
  for (const auto& clip : clips) {
    append_sample(set, flat, video, clip.clip.index,
                  static_cast<int>(clip.label));
  }
  const SampleSet samples =
      finish(std::move(flat), std::move(set), video.features.cols);
  const ClassifyResult scored = classify(probe, encoder, samples);

  std::size_t best = 0;
  for (std::size_t i = 1; i < clips.size(); ++i) {
    if (scored.probs.at(i, 1) > scored.probs.at(best, 1)) best = i;
  }
  LocalizeResult result;
  result.predicted_time = clips[best].clip.start + clips[best].clip.duration / 2.0;
  const double t_a = *video.transition;
  for (double threshold : thresholds) {
    result.correct_at.emplace_back(
        threshold, std::abs(result.predicted_time - t_a) <= threshold + kTimeEps);
  }
  return result;
}

double anticipate(const ModelParams& encoder,
                  const std::vector<const VideoRecord*>& train_videos,
                  const std::vector<const VideoRecord*>& test_videos,
                  double horizon, Regime regime, const EvalOptions& opts,
                  Rng& rng) {
  const SampleSet train = anticipation_samples(train_videos, opts.stride,
                                               opts.window, horizon);
  const SampleSet test =
      anticipation_samples(test_videos, opts.stride, opts.window, horizon);
  if (train.size() == 0 || test.size() == 0) {
    throw NoValidPairs("no clip has a successor " + std::to_string(horizon) +
                       " seconds ahead");
  }
  const FitResult fit = fit_probe(encoder, train, regime, opts.probe, rng,
                                  /*require_all_classes=*/false);
  return classify(fit.probe, fit.encoder, test).accuracy;
}

std::string to_json_line(const EvalMetrics& m) {
  nlohmann::json j;
  j["representation"] = m.representation;
  j["regime"] = to_string(m.regime);
  j["labeled_fraction"] = m.labeled_fraction;
  j["cls_accuracy"] = m.cls_accuracy;
  nlohmann::json loc = nlohmann::json::object();
  for (const auto& [threshold, acc] : m.loc_accuracy_at) {
    char key[16];
    std::snprintf(key, sizeof(key), "%.2f", threshold);
    loc[key] = acc;
  }
  j["loc_accuracy_at"] = std::move(loc);
  j["ant_accuracy"] = m.ant_accuracy;
  j["seed"] = m.seed;
  j["config_digest"] = m.config_digest;
  return j.dump();
}

EvalMetrics evaluate_representation(const ModelParams& encoder,
                                    const std::vector<VideoRecord>& train,
                                    const std::vector<VideoRecord>& test,
                                    Regime regime, double labeled_fraction,
                                    const EvalOptions& opts, Rng& rng) {
  if (train.empty() || test.empty()) {
    throw InvalidConfig("evaluation needs nonempty labeled splits");
  }
  Rng subsample_rng = rng.stream(1);
  Rng cls_rng = rng.stream(2);
  Rng ant_rng = rng.stream(3);

  const auto train_videos = subsample_videos(train, labeled_fraction,
                                             subsample_rng);
  std::vector<const VideoRecord*> test_videos;
  test_videos.reserve(test.size());
  for (const auto& v : test) test_videos.push_back(&v);

  EvalMetrics metrics;
  metrics.regime = regime;
  metrics.labeled_fraction = labeled_fraction;

  const SampleSet cls_train =
      classification_samples(train_videos, opts.stride, opts.window);
  const SampleSet cls_test =
      classification_samples(test_videos, opts.stride, opts.window);
  const FitResult fit =
      fit_probe(encoder, cls_train, regime, opts.probe, cls_rng);
  metrics.cls_accuracy = classify(fit.probe, fit.encoder, cls_test).accuracy;

  std::vector<std::size_t> hits(opts.thresholds.size(), 0);
  for (const VideoRecord* video : test_videos) {
    const LocalizeResult loc =
        localize(fit.probe, fit.encoder, *video, opts.thresholds, opts.stride,
                 opts.window);
    for (std::size_t i = 0; i < opts.thresholds.size(); ++i) {
      if (loc.correct_at[i].second) hits[i] += 1;
    }
  }
  for (std::size_t i = 0; i < opts.thresholds.size(); ++i) {
    metrics.loc_accuracy_at.emplace_back(
        opts.thresholds[i],
        static_cast<double>(hits[i]) / static_cast<double>(test_videos.size()));
  }

  metrics.ant_accuracy = anticipate(encoder, train_videos, test_videos,
                                    opts.horizon, regime, opts, ant_rng);
  return metrics;
}

std::vector<AblationRow> run_ablation_matrix(
    const std::vector<VideoRecord>& dataset,
    const std::vector<AblationCell>& grid,
    const std::vector<std::uint64_t>& seeds, const ModelDims& dims,
    double temperature, const PretrainOptions& pretrain_opts,
    const EvalOptions& eval_opts, const std::string& config_digest) {
  if (grid.empty() || seeds.empty()) {
    throw InvalidConfig("ablation grid and seed list must be nonempty");
  }
  std::vector<UnlabeledVideo> pool;
  std::vector<VideoRecord> train, test;
  for (const auto& video : dataset) {
    switch (video.split) {
      case Split::PretrainUnlabeled: pool.push_back(to_unlabeled(video)); break;
      case Split::LabeledTrain: train.push_back(video); break;
      case Split::LabeledTest: test.push_back(video); break;
    }
  }

  std::vector<AblationRow> rows;
  for (const AblationCell& cell : grid) {
    for (const std::uint64_t seed : seeds) {
      AblationRow row;
      row.scope = cell.scope;
      row.mode = cell.mode;
      row.seed = seed;
      try {
        PretrainOptions opts = pretrain_opts;
        opts.scope = cell.scope;
        opts.mode = cell.mode;
        opts.seed = seed;
        const PretrainResult trained =
            pretrain(pool, dims, temperature, opts);
        Rng eval_rng = Rng(seed).stream(0xe7a1ULL);
        row.metrics =
            evaluate_representation(trained.params, train, test,
                                    Regime::Frozen, 1.0, eval_opts, eval_rng);
        row.metrics.seed = seed;
        row.metrics.config_digest = config_digest;
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace ualab
