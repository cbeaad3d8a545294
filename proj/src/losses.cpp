#include "ualab/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace ualab {

namespace {

// All six permutations of three items, lexicographic. The classification
// target of the permutation head is the row index.
constexpr std::array<std::array<int, 3>, 6> kPerms = {{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0},
}};

void check_temperature(double tau) {
  if (!(tau > 0.0)) {
    throw NonPositiveTemperature("temperature must be positive, got " +
                                 std::to_string(tau));
  }
}

}  // namespace

const char* to_string(LossMode mode) {
  switch (mode) {
    case LossMode::TempOnly: return "temp_only";
    case LossMode::OrdOnly: return "ord_only";
    case LossMode::Combined: return "combined";
    case LossMode::CombinedPermutation: return "combined_permutation";
  }
  return "?";
}

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "temp_only") return LossMode::TempOnly;
  if (s == "ord_only") return LossMode::OrdOnly;
  if (s == "combined") return LossMode::Combined;
  if (s == "combined_permutation") return LossMode::CombinedPermutation;
  throw InvalidConfig("unknown loss mode: " + s);
}

double similarity_q(std::span<const double> x, std::span<const double> y,
                    double tau) {
  check_temperature(tau);
  if (x.size() != y.size()) throw ShapeMismatch("similarity_q: size mismatch");
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx += x[i] * x[i];
    yy += y[i] * y[i];
    xy += x[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) {
    throw ZeroVector("similarity_q of a zero vector is undefined");
  }
  return std::exp(xy / (std::sqrt(xx) * std::sqrt(yy)) / tau);
}

BatchNodes build_batch_features(Graph& g, const ModelParams& params,
                                const Batch& batch) {
  BatchNodes nodes;
  const auto encode_rows = [&](const Matrix& block, std::vector<int>& out) {
    out.reserve(block.rows);
    for (std::size_t i = 0; i < block.rows; ++i) {
      const int x = g.input(std::span<const double>(block.row(i), block.cols));
      out.push_back(build_encode(g, params, x));
    }
  };
  encode_rows(batch.anchors, nodes.f_anchor);
  encode_rows(batch.positives, nodes.f_positive);
  encode_rows(batch.negatives, nodes.f_negative);
  return nodes;
}

namespace {

// -log( q(a, p) / (q(a, p) + sum_j q(a, n_j)) ) in log-domain:
// logsumexp over the scaled cosines minus the positive's scaled cosine.
int build_nce_term(Graph& g, int s_positive, const std::vector<int>& s_negs) {
  std::vector<int> all;
  all.reserve(s_negs.size() + 1);
  all.push_back(s_positive);
  all.insert(all.end(), s_negs.begin(), s_negs.end());
  return g.sub(g.logsumexp(std::move(all)), s_positive);
}

}  // namespace

int build_temporal_contrastive(Graph& g, const ModelParams& params,
                               const BatchNodes& nodes) {
  check_temperature(params.temperature);
  const double inv_tau = 1.0 / params.temperature;
  const std::size_t k = nodes.f_anchor.size();
  if (k == 0) throw EmptyNegativeSet("batch has no triplets");

  std::vector<int> z1(k), z2(k), zn(k);
  for (std::size_t i = 0; i < k; ++i) {
    z1[i] = build_project(g, params, nodes.f_anchor[i]);
    z2[i] = build_project(g, params, nodes.f_positive[i]);
    zn[i] = build_project(g, params, nodes.f_negative[i]);
  }

  std::vector<int> terms;
  terms.reserve(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    // cos(z1, z2) is symmetric, so both directions share the positive score.
    const int s_pos = g.scale(g.cosine(z1[i], z2[i]), inv_tau);
    std::vector<int> s_negs_1(k), s_negs_2(k);
    for (std::size_t j = 0; j < k; ++j) {
      s_negs_1[j] = g.scale(g.cosine(z1[i], zn[j]), inv_tau);
      s_negs_2[j] = g.scale(g.cosine(z2[i], zn[j]), inv_tau);
    }
    terms.push_back(build_nce_term(g, s_pos, s_negs_1));
    terms.push_back(build_nce_term(g, s_pos, s_negs_2));
  }
  return g.average(std::move(terms));
}

int build_pair_order(Graph& g, const ModelParams& params, const Batch& batch,
                     const BatchNodes& nodes, Rng& rng) {
  const std::size_t k = nodes.f_anchor.size();
  std::vector<int> losses;
  losses.reserve(3 * k);
  for (std::size_t i = 0; i < k; ++i) {
    const Triplet& t = batch.triplets[i];
    const std::array<std::pair<int, int>, 3> pairs = {{
        {0, 1},  // (anchor, positive)
        {0, 2},  // (anchor, negative)
        {1, 2},  // (positive, negative)
    }};
    const std::array<int, 3> feature = {nodes.f_anchor[i],
                                        nodes.f_positive[i],
                                        nodes.f_negative[i]};
    const std::array<int, 3> index = {t.anchor, t.positive, t.negative};
    for (const auto& [a, b] : pairs) {
      if (index[static_cast<std::size_t>(a)] ==
          index[static_cast<std::size_t>(b)]) {
        throw DegenerateIndices("order pair with equal clip indices in " +
                                t.video_id);
      }
      int first = a, second = b;
      if (rng.coin()) std::swap(first, second);
      const double label = index[static_cast<std::size_t>(first)] <
                                   index[static_cast<std::size_t>(second)]
                               ? 1.0
                               : 0.0;
      const int logit = build_order_logit(
          g, params, feature[static_cast<std::size_t>(first)],
          feature[static_cast<std::size_t>(second)]);
      losses.push_back(g.bce_with_logit(logit, label));
    }
  }
  return g.average(std::move(losses));
}

int build_permutation(Graph& g, const ModelParams& params, const Batch& batch,
                      const BatchNodes& nodes, Rng& rng) {
  const std::size_t k = nodes.f_anchor.size();
  std::vector<int> losses;
  losses.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const Triplet& t = batch.triplets[i];
    // Arrange the three clips in temporal order, then scramble.
    std::array<std::pair<int, int>, 3> ordered = {{
        {t.anchor, nodes.f_anchor[i]},
        {t.positive, nodes.f_positive[i]},
        {t.negative, nodes.f_negative[i]},
    }};
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const int target = static_cast<int>(rng.uniform_int(kPerms.size()));
    const auto& perm = kPerms[static_cast<std::size_t>(target)];
    const int cat = g.concat(
        g.concat(ordered[static_cast<std::size_t>(perm[0])].second,
                 ordered[static_cast<std::size_t>(perm[1])].second),
        ordered[static_cast<std::size_t>(perm[2])].second);
    const ParamBlock& p = params.p;
    const int h = g.tanh_of(g.affine(g.param(p.perm_w1), g.param(p.perm_b1),
                                     cat, p.perm_w1.rows, p.perm_w1.cols));
    const int logits = g.affine(g.param(p.perm_w2), g.param(p.perm_b2), h,
                                p.perm_w2.rows, p.perm_w2.cols);
    losses.push_back(g.softmax_cross_entropy(logits, target));
  }
  return g.average(std::move(losses));
}

TotalLossNodes build_total_loss(Graph& g, const ModelParams& params,
                                const Batch& batch, LossMode mode, Rng& rng) {
  const BatchNodes nodes = build_batch_features(g, params, batch);
  const int k = batch.size();
  TotalLossNodes out;

  if (mode != LossMode::OrdOnly) {
    out.temp = build_temporal_contrastive(g, params, nodes);
    out.report.l_temp = g.scalar_value(out.temp);
    out.report.negative_count = k;
  }
  if (mode != LossMode::TempOnly) {
    if (mode == LossMode::CombinedPermutation) {
      out.ord = build_permutation(g, params, batch, nodes, rng);
      out.report.pair_count = k;
    } else {
      out.ord = build_pair_order(g, params, batch, nodes, rng);
      out.report.pair_count = 3 * k;
    }
    out.report.l_ord = g.scalar_value(out.ord);
  }

  if (out.temp >= 0 && out.ord >= 0) {
    out.total = g.add(out.temp, out.ord);
  } else {
    out.total = out.temp >= 0 ? out.temp : out.ord;
  }
  out.report.l_total = g.scalar_value(out.total);
  return out;
}

// ---------------------------------------------------------------------------
// Eager values
// ---------------------------------------------------------------------------

double info_nce_projected(std::span<const double> zx,
                          std::span<const double> zy,
                          const std::vector<std::vector<double>>& z_negatives,
                          double tau) {
  check_temperature(tau);
  if (z_negatives.empty()) {
    throw EmptyNegativeSet("InfoNCE needs at least one negative");
  }
  Graph g;
  const int nx = g.input(zx);
  const int ny = g.input(zy);
  const int s_pos = g.scale(g.cosine(nx, ny), 1.0 / tau);
  std::vector<int> s_negs;
  s_negs.reserve(z_negatives.size());
  for (const auto& zn : z_negatives) {
    s_negs.push_back(g.scale(g.cosine(nx, g.input(zn)), 1.0 / tau));
  }
  return g.scalar_value(build_nce_term(g, s_pos, s_negs));
}

double info_nce(std::span<const double> x, std::span<const double> y,
                const std::vector<std::vector<double>>& negatives,
                const ModelParams& params) {
  std::vector<std::vector<double>> z_negatives;
  z_negatives.reserve(negatives.size());
  for (const auto& n : negatives) z_negatives.push_back(project(params, n));
  return info_nce_projected(project(params, x), project(params, y),
                            z_negatives, params.temperature);
}

double temporal_contrastive(const Batch& batch, const ModelParams& params) {
  Graph g;
  const BatchNodes nodes = build_batch_features(g, params, batch);
  return g.scalar_value(build_temporal_contrastive(g, params, nodes));
}

double temporal_contrastive_projected(const Matrix& z1, const Matrix& z2,
                                      const Matrix& zn, double tau) {
  check_temperature(tau);
  if (z1.rows != z2.rows || z1.rows != zn.rows || z1.rows == 0) {
    throw ShapeMismatch("projected blocks must have equal nonzero rows");
  }
  Graph g;
  const auto row_inputs = [&](const Matrix& m) {
    std::vector<int> ids(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
      ids[i] = g.input(std::span<const double>(m.row(i), m.cols));
    }
    return ids;
  };
  const std::vector<int> a = row_inputs(z1);
  const std::vector<int> b = row_inputs(z2);
  const std::vector<int> n = row_inputs(zn);
  const double inv_tau = 1.0 / tau;
  std::vector<int> terms;
  for (std::size_t i = 0; i < z1.rows; ++i) {
    const int s_pos = g.scale(g.cosine(a[i], b[i]), inv_tau);
    std::vector<int> s1(z1.rows), s2(z1.rows);
    for (std::size_t j = 0; j < z1.rows; ++j) {
      s1[j] = g.scale(g.cosine(a[i], n[j]), inv_tau);
      s2[j] = g.scale(g.cosine(b[i], n[j]), inv_tau);
    }
    terms.push_back(build_nce_term(g, s_pos, s1));
    terms.push_back(build_nce_term(g, s_pos, s2));
  }
  return g.scalar_value(g.average(std::move(terms)));
}

double pair_order_loss(const Batch& batch, const ModelParams& params,
                       Rng& rng) {
  Graph g;
  const BatchNodes nodes = build_batch_features(g, params, batch);
  return g.scalar_value(build_pair_order(g, params, batch, nodes, rng));
}

double permutation_loss(const Batch& batch, const ModelParams& params,
                        Rng& rng) {
  Graph g;
  const BatchNodes nodes = build_batch_features(g, params, batch);
  return g.scalar_value(build_permutation(g, params, batch, nodes, rng));
}

LossReport total_loss(const Batch& batch, const ModelParams& params,
                      LossMode mode, Rng& rng) {
  Graph g;
  return build_total_loss(g, params, batch, mode, rng).report;
}

}  // namespace ualab
