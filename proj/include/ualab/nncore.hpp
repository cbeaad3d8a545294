#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ualab/matrix.hpp"
#include "ualab/rng.hpp"

namespace ualab {

struct ModelDims {
  int d_in = 32;
  int enc_hidden = 64;  // two hidden layers of this width
  int d_f = 32;         // backbone feature size
  int proj_hidden = 32;
  int d_z = 16;         // projection size for the contrastive loss
  int order_hidden = 32;
  int perm_hidden = 32;

  bool operator==(const ModelDims&) const = default;
};

// All learnable tensors. Weight matrices are (out x in); biases are (out x 1).
struct ParamBlock {
  Matrix enc_w1, enc_b1, enc_w2, enc_b2, enc_w3, enc_b3;
  Matrix proj_w1, proj_b1, proj_w2, proj_b2;
  Matrix ord_w1, ord_b1, ord_w2, ord_b2;
  Matrix perm_w1, perm_b1, perm_w2, perm_b2;

  static ParamBlock shaped(const ModelDims& dims);
  void zero();

  template <class F>
  void for_each(F&& f) {
    f("enc_w1", enc_w1); f("enc_b1", enc_b1);
    f("enc_w2", enc_w2); f("enc_b2", enc_b2);
    f("enc_w3", enc_w3); f("enc_b3", enc_b3);
    f("proj_w1", proj_w1); f("proj_b1", proj_b1);
    f("proj_w2", proj_w2); f("proj_b2", proj_b2);
    f("ord_w1", ord_w1); f("ord_b1", ord_b1);
    f("ord_w2", ord_w2); f("ord_b2", ord_b2);
    f("perm_w1", perm_w1); f("perm_b1", perm_b1);
    f("perm_w2", perm_w2); f("perm_b2", perm_b2);
  }

  template <class F>
  void for_each(F&& f) const {
    const_cast<ParamBlock*>(this)->for_each(
        [&](const char* name, Matrix& m) { f(name, const_cast<const Matrix&>(m)); });
  }
};

struct ModelParams {
  ModelDims dims;
  double temperature = 0.1;
  ParamBlock p;

  // Weights ~ N(0, 1/fan_in), biases zero.
  static ModelParams init(const ModelDims& dims, double temperature, Rng& rng);
};

bool same_values(const ParamBlock& a, const ParamBlock& b);

// ---------------------------------------------------------------------------
// Reverse-mode tape. Node values are flat vectors (scalars have size 1);
// building the graph runs the forward pass, backward() fills gradients in
// reverse creation order. Parameters enter as memoized leaf views, so after
// backward() each parameter's total gradient sits on its single leaf.
// ---------------------------------------------------------------------------

class Graph {
 public:
  int input(std::span<const double> v);
  int input_scalar(double v);
  int param(const Matrix& m);

  int affine(int w, int b, int x, std::size_t out, std::size_t in);
  int tanh_of(int x);
  int concat(int a, int b);
  int dot(int a, int b);
  int cosine(int a, int b);  // throws ZeroVector if either input is zero
  int scale(int x, double c);
  int add(int a, int b);
  int sub(int a, int b);
  int sum_all(int x);
  int logsumexp(std::vector<int> scalars);
  int average(std::vector<int> scalars);
  int bce_with_logit(int logit, double label);
  int softmax_cross_entropy(int logits, int target);

  double scalar_value(int id) const;
  std::span<const double> value(int id) const;
  std::span<const double> grad(int id) const;
  std::size_t node_count() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape. Gradients are zeroed
  // first, so repeated calls produce identical results.
  void backward(int loss);

  // Calls f(&param_matrix, grad_values) for every parameter leaf.
  template <class F>
  void visit_param_grads(F&& f) const {
    for (const auto& [ptr, id] : param_ids_) {
      f(ptr, std::span<const double>(nodes_[static_cast<std::size_t>(id)].grad));
    }
  }

  void clear();

 private:
  enum class Op : std::uint8_t {
    Input, Param, Affine, Tanh, Concat, Dot, CosSim, Scale, Add, Sub,
    SumAll, LogSumExp, Average, BceLogit, SoftmaxCE,
  };

  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    double scalar0 = 0.0;
    const Matrix* param = nullptr;
    std::vector<int> args;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> aux;
  };

  int push(Node node);
  Node& at(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& at(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  void backward_node(Node& node);

  std::vector<Node> nodes_;
  std::unordered_map<const Matrix*, int> param_ids_;
};

// Accumulates the tape's parameter gradients into a gradient block that
// mirrors the given parameters.
void accumulate_param_grads(const Graph& graph, const ModelParams& params,
                            ParamBlock& grads);

// Graph builders for the model heads.
int build_encode(Graph& g, const ModelParams& params, int x);
int build_project(Graph& g, const ModelParams& params, int f);
int build_order_logit(Graph& g, const ModelParams& params, int f1, int f2);
int build_perm_logits(Graph& g, const ModelParams& params, int f1, int f2,
                      int f3);

// Eager single-vector forward passes (no tape). Bit-identical to the graph
// builders: both run on the same row kernels.
std::vector<double> encode(const ModelParams& params,
                           std::span<const double> x);
std::vector<double> project(const ModelParams& params,
                            std::span<const double> f);
double order_logit(const ModelParams& params, std::span<const double> f1,
                   std::span<const double> f2);

// Batched encoder running on the OpenMP kernels; used by the evaluation
// paths where thousands of clips are pushed through a frozen or fine-tuned
// backbone.
void encode_batch(const ModelParams& params, const Matrix& X, Matrix& F);

struct EncoderActivations {
  Matrix a1, a2, f;  // post-tanh hidden activations and final features
};

void encode_batch_cached(const ModelParams& params, const Matrix& X,
                         EncoderActivations& acts);
// Accumulates encoder gradients for dL/dF into grads (encoder tensors only).
void encode_batch_backward(const ModelParams& params, const Matrix& X,
                           const EncoderActivations& acts, const Matrix& dF,
                           ParamBlock& grads);

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

enum class OptKind { Sgd, Adam };

struct OptimState {
  OptKind kind = OptKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  ParamBlock m, v;

  static OptimState sgd(double lr, const ModelDims& dims);
  static OptimState adam(double lr, const ModelDims& dims);
};

void opt_step(OptimState& opt, ModelParams& params, const ParamBlock& grads);

// ---------------------------------------------------------------------------
// Checkpoints: flat binary, little-endian. Layout:
//   magic "UALABCK1" | u32 version | u64 seed | u32 len + digest bytes |
//   f64 temperature | 7 x u32 model dims | u32 tensor count |
//   per tensor: u32 len + name bytes, u32 rows, u32 cols |
//   all tensor values as f64 little-endian, concatenated in table order.
// ---------------------------------------------------------------------------

struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
  std::string config_digest;
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     std::uint64_t seed, const std::string& config_digest);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ualab
