#include "ualab/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ualab {

namespace {

constexpr double kStartScale = 0.3;    // latent start spread
constexpr double kBaseStep = 0.15;     // drift per grid step
constexpr double kWiggleSigma = 0.03;  // per-step isotropic jitter
constexpr double kDirectionMix = 0.35; // per-video spread around shared drift

// Stream keys for dataset-level draws; video i uses key i.
constexpr std::uint64_t kMapStream = 0xda7a00000000001ULL;
constexpr std::uint64_t kDriftStream = 0xda7a00000000002ULL;

using Vec = std::vector<double>;

Vec random_unit(Rng& rng) {
  Vec v(kLatentDim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

Vec mix_unit(const Vec& shared, double mix, Rng& rng) {
  Vec v(kLatentDim);
  double norm2 = 0.0;
  for (int k = 0; k < kLatentDim; ++k) {
    v[k] = shared[k] + mix * rng.normal();
    norm2 += v[k] * v[k];
  }
  const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-300));
  for (auto& x : v) x *= inv;
  return v;
}

struct DatasetLevel {
  Matrix feature_map;  // d_in x kLatentDim
  Vec pre_drift;
  Vec post_drift;
};

DatasetLevel dataset_level(const GenConfig& cfg) {
  DatasetLevel d;
  Rng map_rng = Rng(cfg.seed).stream(kMapStream);
  d.feature_map = Matrix(static_cast<std::size_t>(cfg.d_in), kLatentDim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kLatentDim));
  for (auto& w : d.feature_map.v) w = scale * map_rng.normal();
  Rng drift_rng = Rng(cfg.seed).stream(kDriftStream);
  d.pre_drift = random_unit(drift_rng);
  d.post_drift = random_unit(drift_rng);
  return d;
}

VideoRecord generate_with(const GenConfig& cfg, const DatasetLevel& level,
                          Rng& rng) {
  const int n = cfg.n_range.first +
                static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                    cfg.n_range.second - cfg.n_range.first + 1)));
  const double duration =
      (static_cast<double>(n) - 1.0) * cfg.clip_stride + kClipSeconds;
  const double t_a = duration * rng.uniform(cfg.transition_quantile_range.first,
                                            cfg.transition_quantile_range.second);

  // Latent samples sit on the clip grid and extend one window past the last
  // clip start, so every clip can average the samples it covers.
  const int window_steps =
      std::max(1, static_cast<int>(std::llround(kClipSeconds / cfg.clip_stride)));
  const int n_latent = n + window_steps - 1;

  Vec state(kLatentDim);
  for (auto& x : state) x = kStartScale * rng.normal();

  // Intentional motion stays orthogonal to the shared post-transition
  // direction; only the regime change moves the trajectory along it.
  Vec pre_dir = mix_unit(level.pre_drift, kDirectionMix, rng);
  double along = 0.0;
  for (int k = 0; k < kLatentDim; ++k) along += pre_dir[k] * level.post_drift[k];
  double pre_norm2 = 0.0;
  for (int k = 0; k < kLatentDim; ++k) {
    pre_dir[k] -= along * level.post_drift[k];
    pre_norm2 += pre_dir[k] * pre_dir[k];
  }
  for (auto& x : pre_dir) x /= std::sqrt(std::max(pre_norm2, 1e-300));

  Vec post_dir = mix_unit(level.post_drift, kDirectionMix, rng);
  const double blend = std::min(1.0, cfg.regime_shift);
  double norm2 = 0.0;
  for (int k = 0; k < kLatentDim; ++k) {
    post_dir[k] = (1.0 - blend) * pre_dir[k] + blend * post_dir[k];
    norm2 += post_dir[k] * post_dir[k];
  }
  for (auto& x : post_dir) x /= std::sqrt(std::max(norm2, 1e-300));

  const double pre_step = kBaseStep * rng.uniform(0.9, 1.1);
  const double post_step = pre_step * (1.0 + cfg.regime_shift);

  std::vector<Vec> latent;
  latent.reserve(static_cast<std::size_t>(n_latent));
  latent.push_back(state);
  for (int j = 1; j < n_latent; ++j) {
    const double time = static_cast<double>(j) * cfg.clip_stride;
    const bool post = time >= t_a;
    const Vec& dir = post ? post_dir : pre_dir;
    const double step = post ? post_step : pre_step;
    for (int k = 0; k < kLatentDim; ++k) {
      state[k] += step * dir[k] + kWiggleSigma * rng.normal();
    }
    latent.push_back(state);
  }

  VideoRecord video;
  video.clip_stride = cfg.clip_stride;
  video.transition = t_a;
  video.features = Matrix(static_cast<std::size_t>(n),
                          static_cast<std::size_t>(cfg.d_in));
  Vec window_mean(kLatentDim);
  for (int t = 0; t < n; ++t) {
    std::fill(window_mean.begin(), window_mean.end(), 0.0);
    for (int j = 0; j < window_steps; ++j) {
      const Vec& s = latent[static_cast<std::size_t>(t + j)];
      for (int k = 0; k < kLatentDim; ++k) window_mean[k] += s[k];
    }
    for (auto& x : window_mean) x /= static_cast<double>(window_steps);
    double* row = video.features.row(static_cast<std::size_t>(t));
    for (int c = 0; c < cfg.d_in; ++c) {
      double acc = 0.0;
      const double* map_row = level.feature_map.row(static_cast<std::size_t>(c));
      for (int k = 0; k < kLatentDim; ++k) acc += map_row[k] * window_mean[k];
      row[c] = acc + cfg.noise_sigma * rng.normal();
    }
  }
  return video;
}

}  // namespace

void validate(const GenConfig& cfg) {
  if (cfg.d_in < 1) throw InvalidConfig("d_in must be at least 1");
  if (cfg.n_range.first < 4 || cfg.n_range.second < cfg.n_range.first) {
    throw InvalidConfig("n_range must satisfy 4 <= min <= max");
  }
  const auto [lo, hi] = cfg.transition_quantile_range;
  if (!(0.0 < lo && lo < hi && hi < 1.0)) {
    throw InvalidConfig("transition quantiles must satisfy 0 < lo < hi < 1");
  }
  if (cfg.noise_sigma < 0.0) throw InvalidConfig("noise_sigma must be >= 0");
  if (cfg.regime_shift < 0.0) throw InvalidConfig("regime_shift must be >= 0");
  if (!(cfg.clip_stride > 0.0)) throw InvalidConfig("clip_stride must be > 0");
}

VideoRecord generate_video(const GenConfig& cfg, Rng& rng) {
  validate(cfg);
  const DatasetLevel level = dataset_level(cfg);
  return generate_with(cfg, level, rng);
}

std::vector<VideoRecord> generate_dataset(const GenConfig& cfg,
                                          const SplitCounts& counts) {
  validate(cfg);
  if (counts.pretrain <= 0 || counts.labeled_train <= 0 ||
      counts.labeled_test <= 0) {
    throw InvalidConfig("all split counts must be positive");
  }
  const DatasetLevel level = dataset_level(cfg);
  const int total = counts.total();
  std::vector<VideoRecord> videos(static_cast<std::size_t>(total));
  const Rng root(cfg.seed);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < total; ++i) {
    Rng video_rng = root.stream(static_cast<std::uint64_t>(i));
    VideoRecord video = generate_with(cfg, level, video_rng);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "video-%06d", i);
    video.id = buf;
    video.split = i < counts.pretrain ? Split::PretrainUnlabeled
                  : i < counts.pretrain + counts.labeled_train
                      ? Split::LabeledTrain
                      : Split::LabeledTest;
    videos[static_cast<std::size_t>(i)] = std::move(video);
  }
  return videos;
}

}  // namespace ualab
