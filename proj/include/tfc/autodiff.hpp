#pragma once

// Reverse-mode differentiation over the handful of operations the encoders,
// projectors, classifier and losses need. Activations use a channels-last
// layout: a 1-D feature map is [batch, length, channels].

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tfc/tensor.hpp"

namespace tfc::ad {

struct Parameter {
  std::string name;
  NumArray value;
  NumArray grad;
};

// Named trainable arrays in insertion order. Shapes are fixed once added.
class ParamStore {
 public:
  Parameter& add(std::string name, NumArray init);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::span<Parameter> entries() noexcept { return params_; }
  std::span<const Parameter> entries() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t total_values() const noexcept;

  void zero_grads();

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class OpTag {
  constant,
  parameter,
  conv1d,
  maxpool1d,
  dense,
  relu,
  add,
  sub,
  scale,
  add_scalar,
  sum,
  mean,
  concat_cols,
  reshape,
  fused,
};

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  NumArray value;
  NumArray grad;
  std::vector<Var> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward_fn;
  OpTag op = OpTag::constant;
  bool requires_grad = false;
  Parameter* param = nullptr;
};

Var constant(NumArray value);
// Leaf bound to a stored parameter; backward() adds its gradient into
// param.grad. The Parameter must outlive the graph.
Var parameter(Parameter& param);

// Builds an op node. requires_grad is inherited from the parents.
Var make_op(NumArray value, std::vector<Var> parents, OpTag op,
            std::function<void(Node&)> backward_fn);

// input [B, L, Cin], weight [K, Cin, Cout], bias [Cout] -> [B, Lout, Cout]
// with Lout = floor((L + 2*padding - K) / stride) + 1. Inputs shorter than the
// kernel (after padding) are zero-extended at the end to exactly K.
Var conv1d(const Var& input, const Var& weight, const Var& bias, std::size_t stride,
           std::size_t padding = 0);

// Window max along the length axis of [B, L, C]. Gradient flows to the first
// maximal element of each window.
Var maxpool1d(const Var& input, std::size_t kernel, std::size_t stride);

// x [B, Din], weight [Din, Dout], bias [Dout] -> [B, Dout]
Var dense(const Var& x, const Var& weight, const Var& bias);

Var relu(const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var sum(const Var& a);
Var mean(const Var& a);
// [N, Da] and [N, Db] -> [N, Da + Db]
Var concat_cols(const Var& a, const Var& b);
Var reshape(const Var& a, Shape shape);
// [B, ...] -> [B, prod(...)]
Var flatten(const Var& a);

// Seeds d(root)/d(root) = 1 and propagates to every reachable node. Internal
// node gradients are recomputed on each call; parameter gradients accumulate
// into their ParamStore until zero_grads(). Root must hold a single value.
void backward(const Var& root);

void zero_grads(ParamStore& store);

// C[M x N] += A[M x K] * B[K x N], all row-major.
void gemm_accumulate(std::size_t m, std::size_t k, std::size_t n, const double* a,
                     const double* b, double* c);

}  // namespace tfc::ad
