#pragma once

#include <span>
#include <string>
#include <vector>

#include "ualab/nncore.hpp"
#include "ualab/sampling.hpp"

namespace ualab {

enum class LossMode { TempOnly, OrdOnly, Combined, CombinedPermutation };

const char* to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& s);

struct LossReport {
  double l_temp = 0.0;
  double l_ord = 0.0;
  double l_total = 0.0;
  int pair_count = 0;      // m: order pairs (or permutation items) in the step
  int negative_count = 0;  // shared contrastive negatives seen by each term
};

// exp(cos(x, y) / tau).
double similarity_q(std::span<const double> x, std::span<const double> y,
                    double tau);

// ---------------------------------------------------------------------------
// Graph builders. Encoded features are shared between the loss terms; the
// contrastive term runs on projections z = g(f), the order terms on the
// backbone features f.
// ---------------------------------------------------------------------------

struct BatchNodes {
  std::vector<int> f_anchor, f_positive, f_negative;
};

BatchNodes build_batch_features(Graph& g, const ModelParams& params,
                                const Batch& batch);

// Symmetric InfoNCE over the batch: every positive pair scores against the
// batch-shared set of K negatives, in both directions, averaged over 2K
// terms. Log-domain with max shift throughout.
int build_temporal_contrastive(Graph& g, const ModelParams& params,
                               const BatchNodes& nodes);

// Three within-video pairs per triplet: (anchor, positive), (anchor,
// negative), (positive, negative). Each pair is concatenated in a coin-flip
// order; the target is 1 when the first concatenated clip comes earlier.
// Mean binary cross-entropy over the 3K pairs.
int build_pair_order(Graph& g, const ModelParams& params, const Batch& batch,
                     const BatchNodes& nodes, Rng& rng);

// Ablation variant: the three clips are concatenated in a uniformly random
// permutation of their temporal order and a 6-way head recovers which one.
int build_permutation(Graph& g, const ModelParams& params, const Batch& batch,
                      const BatchNodes& nodes, Rng& rng);

struct TotalLossNodes {
  int total = -1;
  int temp = -1;  // -1 when the mode excludes the term
  int ord = -1;
  LossReport report;
};

TotalLossNodes build_total_loss(Graph& g, const ModelParams& params,
                                const Batch& batch, LossMode mode, Rng& rng);

// ---------------------------------------------------------------------------
// Eager values (scratch graph under the hood, same code path as training).
// ---------------------------------------------------------------------------

// InfoNCE on already-projected vectors.
double info_nce_projected(std::span<const double> zx,
                          std::span<const double> zy,
                          const std::vector<std::vector<double>>& z_negatives,
                          double tau);

// InfoNCE on backbone features; the projection head is applied to all inputs.
double info_nce(std::span<const double> x, std::span<const double> y,
                const std::vector<std::vector<double>>& negatives,
                const ModelParams& params);

double temporal_contrastive(const Batch& batch, const ModelParams& params);

// Value-level variant on projected vectors (rows of the three blocks).
double temporal_contrastive_projected(const Matrix& z1, const Matrix& z2,
                                      const Matrix& zn, double tau);

double pair_order_loss(const Batch& batch, const ModelParams& params,
                       Rng& rng);
double permutation_loss(const Batch& batch, const ModelParams& params,
                        Rng& rng);

LossReport total_loss(const Batch& batch, const ModelParams& params,
                      LossMode mode, Rng& rng);

}  // namespace ualab
