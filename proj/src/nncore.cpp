#include "ualab/nncore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ualab/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace ualab {

namespace {
constexpr double kProbClamp = 1e-12;
constexpr char kCheckpointMagic[8] = {'U', 'A', 'L', 'A', 'B', 'C', 'K', '1'};
}  // namespace

ParamBlock ParamBlock::shaped(const ModelDims& d) {
  const auto mat = [](int r, int c) {
    return Matrix(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  ParamBlock p;
  p.enc_w1 = mat(d.enc_hidden, d.d_in);
  p.enc_b1 = mat(d.enc_hidden, 1);
  p.enc_w2 = mat(d.enc_hidden, d.enc_hidden);
  p.enc_b2 = mat(d.enc_hidden, 1);
  p.enc_w3 = mat(d.d_f, d.enc_hidden);
  p.enc_b3 = mat(d.d_f, 1);
  p.proj_w1 = mat(d.proj_hidden, d.d_f);
  p.proj_b1 = mat(d.proj_hidden, 1);
  p.proj_w2 = mat(d.d_z, d.proj_hidden);
  p.proj_b2 = mat(d.d_z, 1);
  p.ord_w1 = mat(d.order_hidden, 2 * d.d_f);
  p.ord_b1 = mat(d.order_hidden, 1);
  p.ord_w2 = mat(1, d.order_hidden);
  p.ord_b2 = mat(1, 1);
  p.perm_w1 = mat(d.perm_hidden, 3 * d.d_f);
  p.perm_b1 = mat(d.perm_hidden, 1);
  p.perm_w2 = mat(6, d.perm_hidden);
  p.perm_b2 = mat(6, 1);
  return p;
}

void ParamBlock::zero() {
  for_each([](const char*, Matrix& m) {
    std::fill(m.v.begin(), m.v.end(), 0.0);
  });
}

ModelParams ModelParams::init(const ModelDims& dims, double temperature,
                              Rng& rng) {
  if (!(temperature > 0.0)) {
    throw NonPositiveTemperature("temperature must be positive");
  }
  ModelParams params;
  params.dims = dims;
  params.temperature = temperature;
  params.p = ParamBlock::shaped(dims);
  params.p.for_each([&](const char* name, Matrix& m) {
    if (std::string_view(name).find("_b") != std::string_view::npos) {
      return;  // biases start at zero
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(m.cols));
    for (auto& w : m.v) w = scale * rng.normal();
  });
  return params;
}

bool same_values(const ParamBlock& a, const ParamBlock& b) {
  std::vector<const Matrix*> av, bv;
  a.for_each([&](const char*, const Matrix& m) { av.push_back(&m); });
  b.for_each([&](const char*, const Matrix& m) { bv.push_back(&m); });
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (!av[i]->same_shape(*bv[i]) || av[i]->v != bv[i]->v) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

int Graph::push(Node node) {
  node.grad.assign(node.value.size(), 0.0);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::input(std::span<const double> v) {
  Node n;
  n.op = Op::Input;
  n.value.assign(v.begin(), v.end());
  return push(std::move(n));
}

int Graph::input_scalar(double v) {
  return input(std::span<const double>(&v, 1));
}

int Graph::param(const Matrix& m) {
  if (auto it = param_ids_.find(&m); it != param_ids_.end()) return it->second;
  Node n;
  n.op = Op::Param;
  n.param = &m;
  n.value = m.v;
  const int id = push(std::move(n));
  param_ids_.emplace(&m, id);
  return id;
}

int Graph::affine(int w, int b, int x, std::size_t out, std::size_t in) {
  const Node& wn = at(w);
  if (wn.value.size() != out * in || at(b).value.size() != out ||
      at(x).value.size() != in) {
    throw ShapeMismatch("affine: inconsistent operand sizes");
  }
  Node n;
  n.op = Op::Affine;
  n.a = w;
  n.b = b;
  n.c = x;
  n.value.resize(out);
  // Same row kernel as the eager path, so taped and eager forwards agree
  // bit-exactly.
  kernels::affine_row(at(x).value.data(), wn.value.data(), out, in,
                      at(b).value.data(), n.value.data());
  return push(std::move(n));
}

int Graph::tanh_of(int x) {
  Node n;
  n.op = Op::Tanh;
  n.a = x;
  n.value.resize(at(x).value.size());
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    n.value[i] = std::tanh(at(x).value[i]);
  }
  return push(std::move(n));
}

int Graph::concat(int a, int b) {
  Node n;
  n.op = Op::Concat;
  n.a = a;
  n.b = b;
  n.value = at(a).value;
  n.value.insert(n.value.end(), at(b).value.begin(), at(b).value.end());
  return push(std::move(n));
}

int Graph::dot(int a, int b) {
  if (at(a).value.size() != at(b).value.size()) {
    throw ShapeMismatch("dot: size mismatch");
  }
  Node n;
  n.op = Op::Dot;
  n.a = a;
  n.b = b;
  double acc = 0.0;
  for (std::size_t i = 0; i < at(a).value.size(); ++i) {
    acc += at(a).value[i] * at(b).value[i];
  }
  n.value = {acc};
  return push(std::move(n));
}

int Graph::cosine(int a, int b) {
  const auto& va = at(a).value;
  const auto& vb = at(b).value;
  if (va.size() != vb.size()) throw ShapeMismatch("cosine: size mismatch");
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    aa += va[i] * va[i];
    bb += vb[i] * vb[i];
    ab += va[i] * vb[i];
  }
  if (aa == 0.0 || bb == 0.0) {
    throw ZeroVector("cosine similarity of a zero vector is undefined");
  }
  const double na = std::sqrt(aa);
  const double nb = std::sqrt(bb);
  Node n;
  n.op = Op::CosSim;
  n.a = a;
  n.b = b;
  n.value = {ab / (na * nb)};
  n.aux = {na, nb};
  return push(std::move(n));
}

int Graph::scale(int x, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = x;
  n.scalar0 = c;
  n.value = at(x).value;
  for (auto& v : n.value) v *= c;
  return push(std::move(n));
}

int Graph::add(int a, int b) {
  if (at(a).value.size() != at(b).value.size()) {
    throw ShapeMismatch("add: size mismatch");
  }
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = at(a).value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += at(b).value[i];
  return push(std::move(n));
}

int Graph::sub(int a, int b) {
  if (at(a).value.size() != at(b).value.size()) {
    throw ShapeMismatch("sub: size mismatch");
  }
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = at(a).value;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= at(b).value[i];
  return push(std::move(n));
}

int Graph::sum_all(int x) {
  Node n;
  n.op = Op::SumAll;
  n.a = x;
  double acc = 0.0;
  for (double v : at(x).value) acc += v;
  n.value = {acc};
  return push(std::move(n));
}

int Graph::logsumexp(std::vector<int> scalars) {
  if (scalars.empty()) throw ShapeMismatch("logsumexp of nothing");
  Node n;
  n.op = Op::LogSumExp;
  double max_v = -HUGE_VAL;
  for (int id : scalars) max_v = std::max(max_v, scalar_value(id));
  double total = 0.0;
  n.aux.resize(scalars.size());
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    n.aux[k] = std::exp(scalar_value(scalars[k]) - max_v);
    total += n.aux[k];
  }
  for (auto& w : n.aux) w /= total;  // softmax weights for backward
  n.value = {max_v + std::log(total)};
  n.args = std::move(scalars);
  return push(std::move(n));
}

int Graph::average(std::vector<int> scalars) {
  if (scalars.empty()) throw ShapeMismatch("average of nothing");
  Node n;
  n.op = Op::Average;
  double acc = 0.0;
  for (int id : scalars) acc += scalar_value(id);
  n.value = {acc / static_cast<double>(scalars.size())};
  n.args = std::move(scalars);
  return push(std::move(n));
}

int Graph::bce_with_logit(int logit, double label) {
  const double l = scalar_value(logit);
  // p = sigmoid(l), q = sigmoid(-l); each computed in its stable branch.
  const double p = l >= 0.0 ? 1.0 / (1.0 + std::exp(-l))
                            : std::exp(l) / (1.0 + std::exp(l));
  const double q = l >= 0.0 ? std::exp(-l) / (1.0 + std::exp(-l))
                            : 1.0 / (1.0 + std::exp(l));
  const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  const double qc = std::clamp(q, kProbClamp, 1.0 - kProbClamp);
  Node n;
  n.op = Op::BceLogit;
  n.a = logit;
  n.scalar0 = label;
  n.aux = {p};
  n.value = {-(label * std::log(pc) + (1.0 - label) * std::log(qc))};
  return push(std::move(n));
}

int Graph::softmax_cross_entropy(int logits, int target) {
  const auto& l = at(logits).value;
  if (target < 0 || static_cast<std::size_t>(target) >= l.size()) {
    throw ShapeMismatch("softmax target out of range");
  }
  const double max_v = *std::max_element(l.begin(), l.end());
  double total = 0.0;
  Node n;
  n.aux.resize(l.size());
  for (std::size_t k = 0; k < l.size(); ++k) {
    n.aux[k] = std::exp(l[k] - max_v);
    total += n.aux[k];
  }
  for (auto& p : n.aux) p /= total;
  const double pt =
      std::clamp(n.aux[static_cast<std::size_t>(target)], kProbClamp, 1.0);
  n.op = Op::SoftmaxCE;
  n.a = logits;
  n.scalar0 = static_cast<double>(target);
  n.value = {-std::log(pt)};
  return push(std::move(n));
}

double Graph::scalar_value(int id) const {
  const Node& n = at(id);
  if (n.value.size() != 1) throw ShapeMismatch("expected a scalar node");
  return n.value[0];
}

std::span<const double> Graph::value(int id) const { return at(id).value; }
std::span<const double> Graph::grad(int id) const { return at(id).grad; }

void Graph::backward(int loss) {
  const Node& ln = at(loss);
  if (ln.value.size() != 1 || !std::isfinite(ln.value[0])) {
    throw NonFiniteLoss("loss must be a finite scalar");
  }
  for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  at(loss).grad[0] = 1.0;
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    backward_node(nodes_[static_cast<std::size_t>(id)]);
  }
}

void Graph::backward_node(Node& n) {
  switch (n.op) {
    case Op::Input:
    case Op::Param:
      break;
    case Op::Affine: {
      Node& wn = at(n.a);
      Node& bn = at(n.b);
      Node& xn = at(n.c);
      const std::size_t out = n.value.size();
      const std::size_t in = xn.value.size();
      for (std::size_t o = 0; o < out; ++o) {
        const double g = n.grad[o];
        if (g == 0.0) continue;
        bn.grad[o] += g;
        const double* wrow = wn.value.data() + o * in;
        double* gw = wn.grad.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) {
          gw[i] += g * xn.value[i];
          xn.grad[i] += g * wrow[i];
        }
      }
      break;
    }
    case Op::Tanh: {
      Node& xn = at(n.a);
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        xn.grad[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
      }
      break;
    }
    case Op::Concat: {
      Node& an = at(n.a);
      Node& bn = at(n.b);
      for (std::size_t i = 0; i < an.value.size(); ++i) an.grad[i] += n.grad[i];
      for (std::size_t i = 0; i < bn.value.size(); ++i) {
        bn.grad[i] += n.grad[an.value.size() + i];
      }
      break;
    }
    case Op::Dot: {
      Node& an = at(n.a);
      Node& bn = at(n.b);
      const double g = n.grad[0];
      for (std::size_t i = 0; i < an.value.size(); ++i) {
        an.grad[i] += g * bn.value[i];
        bn.grad[i] += g * an.value[i];
      }
      break;
    }
    case Op::CosSim: {
      Node& an = at(n.a);
      Node& bn = at(n.b);
      const double g = n.grad[0];
      const double na = n.aux[0], nb = n.aux[1];
      const double cos_v = n.value[0];
      for (std::size_t i = 0; i < an.value.size(); ++i) {
        an.grad[i] += g * (bn.value[i] / (na * nb) -
                           cos_v * an.value[i] / (na * na));
        bn.grad[i] += g * (an.value[i] / (na * nb) -
                           cos_v * bn.value[i] / (nb * nb));
      }
      break;
    }
    case Op::Scale: {
      Node& xn = at(n.a);
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        xn.grad[i] += n.scalar0 * n.grad[i];
      }
      break;
    }
    case Op::Add: {
      Node& an = at(n.a);
      Node& bn = at(n.b);
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        an.grad[i] += n.grad[i];
        bn.grad[i] += n.grad[i];
      }
      break;
    }
    case Op::Sub: {
      Node& an = at(n.a);
      Node& bn = at(n.b);
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        an.grad[i] += n.grad[i];
        bn.grad[i] -= n.grad[i];
      }
      break;
    }
    case Op::SumAll: {
      Node& xn = at(n.a);
      for (std::size_t i = 0; i < xn.value.size(); ++i) {
        xn.grad[i] += n.grad[0];
      }
      break;
    }
    case Op::LogSumExp: {
      for (std::size_t k = 0; k < n.args.size(); ++k) {
        at(n.args[k]).grad[0] += n.grad[0] * n.aux[k];
      }
      break;
    }
    case Op::Average: {
      const double g = n.grad[0] / static_cast<double>(n.args.size());
      for (int id : n.args) at(id).grad[0] += g;
      break;
    }
    case Op::BceLogit: {
      at(n.a).grad[0] += n.grad[0] * (n.aux[0] - n.scalar0);
      break;
    }
    case Op::SoftmaxCE: {
      Node& ln = at(n.a);
      const auto target = static_cast<std::size_t>(n.scalar0);
      for (std::size_t k = 0; k < ln.value.size(); ++k) {
        ln.grad[k] += n.grad[0] * (n.aux[k] - (k == target ? 1.0 : 0.0));
      }
      break;
    }
  }
}

void Graph::clear() {
  nodes_.clear();
  param_ids_.clear();
}

void accumulate_param_grads(const Graph& graph, const ModelParams& params,
                            ParamBlock& grads) {
  std::unordered_map<const Matrix*, Matrix*> sinks;
  std::vector<const Matrix*> srcs;
  params.p.for_each([&](const char*, const Matrix& m) { srcs.push_back(&m); });
  std::vector<Matrix*> dsts;
  grads.for_each([&](const char*, Matrix& m) { dsts.push_back(&m); });
  for (std::size_t i = 0; i < srcs.size(); ++i) sinks[srcs[i]] = dsts[i];

  graph.visit_param_grads([&](const Matrix* p, std::span<const double> g) {
    auto it = sinks.find(p);
    if (it == sinks.end()) return;  // parameter of a different model
    Matrix& dst = *it->second;
    for (std::size_t i = 0; i < g.size(); ++i) dst.v[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// Model heads
// ---------------------------------------------------------------------------

namespace {

int mlp2(Graph& g, const Matrix& w1, const Matrix& b1, const Matrix& w2,
         const Matrix& b2, int x) {
  const int h = g.tanh_of(
      g.affine(g.param(w1), g.param(b1), x, w1.rows, w1.cols));
  return g.affine(g.param(w2), g.param(b2), h, w2.rows, w2.cols);
}

}  // namespace

int build_encode(Graph& g, const ModelParams& params, int x) {
  const ParamBlock& p = params.p;
  int h = g.tanh_of(
      g.affine(g.param(p.enc_w1), g.param(p.enc_b1), x, p.enc_w1.rows,
               p.enc_w1.cols));
  h = g.tanh_of(g.affine(g.param(p.enc_w2), g.param(p.enc_b2), h,
                         p.enc_w2.rows, p.enc_w2.cols));
  return g.affine(g.param(p.enc_w3), g.param(p.enc_b3), h, p.enc_w3.rows,
                  p.enc_w3.cols);
}

int build_project(Graph& g, const ModelParams& params, int f) {
  return mlp2(g, params.p.proj_w1, params.p.proj_b1, params.p.proj_w2,
              params.p.proj_b2, f);
}

int build_order_logit(Graph& g, const ModelParams& params, int f1, int f2) {
  return mlp2(g, params.p.ord_w1, params.p.ord_b1, params.p.ord_w2,
              params.p.ord_b2, g.concat(f1, f2));
}

int build_perm_logits(Graph& g, const ModelParams& params, int f1, int f2,
                      int f3) {
  return mlp2(g, params.p.perm_w1, params.p.perm_b1, params.p.perm_w2,
              params.p.perm_b2, g.concat(g.concat(f1, f2), f3));
}

// ---------------------------------------------------------------------------
// Eager forwards
// ---------------------------------------------------------------------------

namespace {

std::vector<double> affine_tanh_affine(const Matrix& w1, const Matrix& b1,
                                       const Matrix& w2, const Matrix& b2,
                                       std::span<const double> x) {
  if (x.size() != w1.cols) throw ShapeMismatch("input size mismatch");
  std::vector<double> h(w1.rows);
  kernels::affine_row(x.data(), w1.v.data(), w1.rows, w1.cols, b1.v.data(),
                      h.data());
  for (auto& v : h) v = std::tanh(v);
  std::vector<double> out(w2.rows);
  kernels::affine_row(h.data(), w2.v.data(), w2.rows, w2.cols, b2.v.data(),
                      out.data());
  return out;
}

}  // namespace

std::vector<double> encode(const ModelParams& params,
                           std::span<const double> x) {
  const ParamBlock& p = params.p;
  if (x.size() != p.enc_w1.cols) throw ShapeMismatch("encode: input size");
  std::vector<double> h1(p.enc_w1.rows);
  kernels::affine_row(x.data(), p.enc_w1.v.data(), p.enc_w1.rows,
                      p.enc_w1.cols, p.enc_b1.v.data(), h1.data());
  for (auto& v : h1) v = std::tanh(v);
  std::vector<double> h2(p.enc_w2.rows);
  kernels::affine_row(h1.data(), p.enc_w2.v.data(), p.enc_w2.rows,
                      p.enc_w2.cols, p.enc_b2.v.data(), h2.data());
  for (auto& v : h2) v = std::tanh(v);
  std::vector<double> f(p.enc_w3.rows);
  kernels::affine_row(h2.data(), p.enc_w3.v.data(), p.enc_w3.rows,
                      p.enc_w3.cols, p.enc_b3.v.data(), f.data());
  return f;
}

std::vector<double> project(const ModelParams& params,
                            std::span<const double> f) {
  return affine_tanh_affine(params.p.proj_w1, params.p.proj_b1,
                            params.p.proj_w2, params.p.proj_b2, f);
}

double order_logit(const ModelParams& params, std::span<const double> f1,
                   std::span<const double> f2) {
  std::vector<double> cat(f1.begin(), f1.end());
  cat.insert(cat.end(), f2.begin(), f2.end());
  return affine_tanh_affine(params.p.ord_w1, params.p.ord_b1, params.p.ord_w2,
                            params.p.ord_b2, cat)[0];
}

// ---------------------------------------------------------------------------
// Batched encoder
// ---------------------------------------------------------------------------

void encode_batch(const ModelParams& params, const Matrix& X, Matrix& F) {
  EncoderActivations acts;
  encode_batch_cached(params, X, acts);
  F = std::move(acts.f);
}

void encode_batch_cached(const ModelParams& params, const Matrix& X,
                         EncoderActivations& acts) {
  const ParamBlock& p = params.p;
  Matrix h(X.rows, p.enc_w1.rows);
  kernels::linear_forward(X, p.enc_w1, p.enc_b1, h);
  acts.a1 = Matrix(h.rows, h.cols);
  kernels::tanh_forward(h, acts.a1);
  Matrix h2(X.rows, p.enc_w2.rows);
  kernels::linear_forward(acts.a1, p.enc_w2, p.enc_b2, h2);
  acts.a2 = Matrix(h2.rows, h2.cols);
  kernels::tanh_forward(h2, acts.a2);
  acts.f = Matrix(X.rows, p.enc_w3.rows);
  kernels::linear_forward(acts.a2, p.enc_w3, p.enc_b3, acts.f);
}

void encode_batch_backward(const ModelParams& params, const Matrix& X,
                           const EncoderActivations& acts, const Matrix& dF,
                           ParamBlock& grads) {
  const ParamBlock& p = params.p;
  kernels::linear_backward_params(acts.a2, dF, grads.enc_w3, grads.enc_b3);
  Matrix da2(acts.a2.rows, acts.a2.cols);
  kernels::linear_backward_input(dF, p.enc_w3, da2);
  Matrix dh2(da2.rows, da2.cols);
  kernels::tanh_backward(acts.a2, da2, dh2);
  kernels::linear_backward_params(acts.a1, dh2, grads.enc_w2, grads.enc_b2);
  Matrix da1(acts.a1.rows, acts.a1.cols);
  kernels::linear_backward_input(dh2, p.enc_w2, da1);
  Matrix dh1(da1.rows, da1.cols);
  kernels::tanh_backward(acts.a1, da1, dh1);
  kernels::linear_backward_params(X, dh1, grads.enc_w1, grads.enc_b1);
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

OptimState OptimState::sgd(double lr, const ModelDims& dims) {
  if (!(lr > 0.0)) throw InvalidConfig("learning rate must be positive");
  OptimState s;
  s.kind = OptKind::Sgd;
  s.lr = lr;
  s.m = ParamBlock::shaped(dims);
  s.v = ParamBlock::shaped(dims);
  return s;
}

OptimState OptimState::adam(double lr, const ModelDims& dims) {
  OptimState s = sgd(lr, dims);
  s.kind = OptKind::Adam;
  return s;
}

void opt_step(OptimState& opt, ModelParams& params, const ParamBlock& grads) {
  std::vector<Matrix*> ps, ms, vs;
  std::vector<const Matrix*> gs;
  params.p.for_each([&](const char*, Matrix& m) { ps.push_back(&m); });
  grads.for_each([&](const char*, const Matrix& m) { gs.push_back(&m); });
  opt.m.for_each([&](const char*, Matrix& m) { ms.push_back(&m); });
  opt.v.for_each([&](const char*, Matrix& m) { vs.push_back(&m); });

  opt.step_count += 1;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Matrix& p = *ps[i];
    const Matrix& g = *gs[i];
    if (!p.same_shape(g)) throw ShapeMismatch("opt_step: grad shape mismatch");
    if (opt.kind == OptKind::Sgd) {
      for (std::size_t k = 0; k < p.v.size(); ++k) p.v[k] -= opt.lr * g.v[k];
    } else {
      Matrix& m = *ms[i];
      Matrix& v = *vs[i];
      const double bc1 =
          1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
      const double bc2 =
          1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
      for (std::size_t k = 0; k < p.v.size(); ++k) {
        m.v[k] = opt.beta1 * m.v[k] + (1.0 - opt.beta1) * g.v[k];
        v.v[k] = opt.beta2 * v.v[k] + (1.0 - opt.beta2) * g.v[k] * g.v[k];
        const double mhat = m.v[k] / bc1;
        const double vhat = v.v[k] / bc2;
        p.v[k] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

template <class T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_str(std::ofstream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::ifstream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     std::uint64_t seed, const std::string& config_digest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod<std::uint32_t>(out, 1);
  write_pod<std::uint64_t>(out, seed);
  write_str(out, config_digest);
  write_pod<double>(out, params.temperature);
  const ModelDims& d = params.dims;
  for (int dim : {d.d_in, d.enc_hidden, d.d_f, d.proj_hidden, d.d_z,
                  d.order_hidden, d.perm_hidden}) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  }
  std::uint32_t count = 0;
  params.p.for_each([&](const char*, const Matrix&) { ++count; });
  write_pod<std::uint32_t>(out, count);
  params.p.for_each([&](const char* name, const Matrix& m) {
    write_str(out, name);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols));
  });
  params.p.for_each([&](const char*, const Matrix& m) {
    out.write(reinterpret_cast<const char*>(m.v.data()),
              static_cast<std::streamsize>(m.v.size() * sizeof(double)));
  });
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointNotFound("checkpoint not found: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("not a checkpoint file: " + path);
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != 1) throw IoError("unsupported checkpoint version");
  Checkpoint ck;
  ck.seed = read_pod<std::uint64_t>(in);
  ck.config_digest = read_str(in);
  ck.params.temperature = read_pod<double>(in);
  ModelDims& d = ck.params.dims;
  for (int* dim : {&d.d_in, &d.enc_hidden, &d.d_f, &d.proj_hidden, &d.d_z,
                   &d.order_hidden, &d.perm_hidden}) {
    *dim = static_cast<int>(read_pod<std::uint32_t>(in));
  }
  ck.params.p = ParamBlock::shaped(d);
  const auto count = read_pod<std::uint32_t>(in);
  std::vector<std::pair<std::string, std::pair<std::uint32_t, std::uint32_t>>>
      table;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_str(in);
    const auto rows = read_pod<std::uint32_t>(in);
    const auto cols = read_pod<std::uint32_t>(in);
    table.emplace_back(name, std::make_pair(rows, cols));
  }
  std::size_t next = 0;
  ck.params.p.for_each([&](const char* name, Matrix& m) {
    if (next >= table.size() || table[next].first != name ||
        table[next].second.first != m.rows ||
        table[next].second.second != m.cols) {
      throw IoError("checkpoint tensor table mismatch at " +
                    std::string(name));
    }
    in.read(reinterpret_cast<char*>(m.v.data()),
            static_cast<std::streamsize>(m.v.size() * sizeof(double)));
    ++next;
  });
  if (!in) throw IoError("truncated checkpoint: " + path);
  return ck;
}

}  // namespace ualab
