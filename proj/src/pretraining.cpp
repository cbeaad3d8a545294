#include "ualab/pretraining.hpp"

#include <numeric>

namespace ualab {

namespace {
constexpr std::uint64_t kInitStream = 0x1417ULL;
constexpr std::uint64_t kBatchStream = 0xb47cULL;
}  // namespace

ModelParams scratch_params(const ModelDims& dims, double temperature,
                           std::uint64_t seed) {
  Rng init_rng = Rng(seed).stream(kInitStream);
  return ModelParams::init(dims, temperature, init_rng);
}

PretrainResult pretrain(const std::vector<UnlabeledVideo>& pool,
                        const ModelDims& dims, double temperature,
                        const PretrainOptions& opts) {
  if (opts.steps < 0 || opts.batch_videos < 1) {
    throw InvalidConfig("pretrain needs steps >= 0 and batch size >= 1");
  }

  PretrainResult result;
  std::vector<const UnlabeledVideo*> usable;
  usable.reserve(pool.size());
  for (const auto& video : pool) {
    if (admits_triplet(video.n_clips(), opts.scope)) {
      usable.push_back(&video);
    } else {
      result.skipped_videos += 1;
    }
  }
  if (static_cast<int>(usable.size()) < opts.batch_videos) {
    throw InvalidConfig("pretrain pool has " + std::to_string(usable.size()) +
                        " usable videos, need at least " +
                        std::to_string(opts.batch_videos));
  }

  result.params = scratch_params(dims, temperature, opts.seed);
  OptimState opt = opts.optimizer == OptKind::Adam
                       ? OptimState::adam(opts.lr, dims)
                       : OptimState::sgd(opts.lr, dims);
  Rng batch_rng = Rng(opts.seed).stream(kBatchStream);

  ParamBlock grads = ParamBlock::shaped(dims);
  std::vector<int> order(usable.size());
  std::vector<const UnlabeledVideo*> batch_videos(
      static_cast<std::size_t>(opts.batch_videos));
  Graph graph;

  result.log.reserve(static_cast<std::size_t>(opts.steps));
  for (int step = 0; step < opts.steps; ++step) {
    // K distinct videos per step via a partial shuffle.
    std::iota(order.begin(), order.end(), 0);
    for (int j = 0; j < opts.batch_videos; ++j) {
      const auto pick = static_cast<std::size_t>(j) +
                        static_cast<std::size_t>(batch_rng.uniform_int(
                            order.size() - static_cast<std::size_t>(j)));
      std::swap(order[static_cast<std::size_t>(j)], order[pick]);
      batch_videos[static_cast<std::size_t>(j)] =
          usable[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
    }
    const Batch batch = assemble_batch(batch_videos, opts.scope, batch_rng);

    graph.clear();
    const TotalLossNodes loss =
        build_total_loss(graph, result.params, batch, opts.mode, batch_rng);
    graph.backward(loss.total);
    grads.zero();
    accumulate_param_grads(graph, result.params, grads);
    opt_step(opt, result.params, grads);

    result.log.push_back({step, loss.report});
  }
  return result;
}

}  // namespace ualab
