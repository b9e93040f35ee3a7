#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualgan/tensor.hpp"

namespace dualgan {

template <typename T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  std::optional<T> clip_bound;
  bool frozen = false;

  BasicParameter() = default;
  BasicParameter(std::string n, BasicTensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = BasicTensor<T>(value.shape()); }
};

using Parameter = BasicParameter<float>;
using Parameter64 = BasicParameter<double>;

template <typename T>
class BasicTape;

/// Handle to a node recorded on a tape.
template <typename T>
class BasicVar {
 public:
  BasicVar() = default;
  BasicVar(BasicTape<T>* tape, int id) : tape_(tape), id_(id) {}

  BasicTape<T>& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const BasicTensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  /// Gradient accumulated into this node by the last backward pass.
  const BasicTensor<T>& grad() const;

 private:
  BasicTape<T>* tape_ = nullptr;
  int id_ = -1;
};

using Var = BasicVar<float>;
using Var64 = BasicVar<double>;

/// Records primitive applications in execution order. Backward replays the
/// record in reverse, which is a reverse topological order by construction.
template <typename T>
class BasicTape {
 public:
  using Backward = std::function<void(BasicTape&, int self)>;

  struct Node {
    BasicTensor<T> value;
    BasicTensor<T> grad;
    bool requires_grad = false;
    BasicParameter<T>* param = nullptr;
    std::vector<int> inputs;
    Backward backward;
  };

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  BasicVar<T> constant(BasicTensor<T> value);
  /// Leaf bound to a parameter. Frozen parameters (or track=false) enter as
  /// constants and never receive gradient.
  BasicVar<T> param(BasicParameter<T>& p, bool track = true);
  /// Non-parameter leaf that collects gradient (read back via Var::grad()).
  BasicVar<T> variable(BasicTensor<T> value);

  BasicVar<T> record(BasicTensor<T> value, std::vector<int> inputs, Backward backward);

  /// Seeds d(root)/d(root) = 1 and accumulates into parameter grads.
  void backward(BasicVar<T> root);
  /// Backward from a non-scalar node seeded with an upstream gradient.
  void backward(BasicVar<T> output, const BasicTensor<T>& seed);

  /// Detaches leaves bound to these parameters so a following backward
  /// neither computes nor accumulates their gradients.
  void exclude(const std::vector<BasicParameter<T>*>& params);

  Node& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }
  std::size_t last_backward_visits() const { return visits_; }

  /// Adds g into the gradient slot of node id (allocating on first use).
  void accumulate(int id, const BasicTensor<T>& g);
  BasicTensor<T>& grad_slot(int id);

 private:
  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

using Tape = BasicTape<float>;
using Tape64 = BasicTape<double>;

template <typename T>
const BasicTensor<T>& BasicVar<T>::value() const {
  return tape_->node(id_).value;
}
template <typename T>
bool BasicVar<T>::requires_grad() const {
  return tape_->node(id_).requires_grad;
}
template <typename T>
const BasicTensor<T>& BasicVar<T>::grad() const {
  return tape_->node(id_).grad;
}

enum class ActivationKind { identity, relu, leaky_relu, tanh };

struct Activation {
  ActivationKind kind = ActivationKind::identity;
  double alpha = 0.2;

  static Activation none() { return {}; }
  static Activation relu() { return {ActivationKind::relu, 0.0}; }
  static Activation leaky(double a = 0.2) { return {ActivationKind::leaky_relu, a}; }
  static Activation tanh() { return {ActivationKind::tanh, 0.0}; }
};

std::string activation_name(const Activation& a);

/// Output extent of a "same"-padded convolution.
std::int64_t same_out_extent(std::int64_t in, std::int64_t stride);

// Layer primitives. Images are NHWC ([H,W,C] is accepted and kept rank 3).
// Conv kernels are [k,k,Cin,Cout]; transposed-conv kernels are [Cin,k,k,Cout].

template <typename T>
BasicVar<T> conv2d(BasicVar<T> input, BasicVar<T> kernel, BasicVar<T> bias, int stride);

template <typename T>
BasicVar<T> conv_transpose2d(BasicVar<T> input, BasicVar<T> kernel, BasicVar<T> bias, int stride);

/// [N] or [B,N] times [N,M] plus [M].
template <typename T>
BasicVar<T> dense(BasicVar<T> input, BasicVar<T> weight, BasicVar<T> bias);

template <typename T>
BasicVar<T> apply_activation(BasicVar<T> input, Activation act);

/// [H,W,C] -> [H*W*C]; [N,H,W,C] -> [N,H*W*C].
template <typename T>
BasicVar<T> flatten(BasicVar<T> input);

template <typename T>
BasicVar<T> reshape(BasicVar<T> input, Shape shape);

/// Channel order is a then b.
template <typename T>
BasicVar<T> concat_channels(BasicVar<T> a, BasicVar<T> b);

template <typename T>
BasicVar<T> pack2x2(BasicVar<T> top_left, BasicVar<T> top_right, BasicVar<T> bottom_left,
                    BasicVar<T> bottom_right);

/// Packs consecutive quartets of a [4M,H,W,C] batch into [M,2H,2W,C].
template <typename T>
BasicVar<T> pack_quartets(BasicVar<T> batch);

template <typename T>
BasicVar<T> slice_batch(BasicVar<T> input, std::int64_t begin, std::int64_t end);

template <typename T>
BasicVar<T> concat_batch(BasicVar<T> a, BasicVar<T> b);

template <typename T>
BasicVar<T> reduce_mean(BasicVar<T> input);

template <typename T>
BasicVar<T> reduce_sum(BasicVar<T> input);

template <typename T>
BasicVar<T> add(BasicVar<T> a, BasicVar<T> b);

template <typename T>
BasicVar<T> sub(BasicVar<T> a, BasicVar<T> b);

template <typename T>
BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b);

template <typename T>
BasicVar<T> scale(BasicVar<T> a, T factor);

/// Mean softmax cross-entropy of logits [B,K] against integer labels.
template <typename T>
BasicVar<T> softmax_cross_entropy(BasicVar<T> logits, const std::vector<int>& labels);

/// Per-channel standardization with batch statistics (no affine terms).
template <typename T>
BasicVar<T> batch_norm(BasicVar<T> input, T epsilon = T(1e-5));

/// Name-keyed snapshot of parameter gradients. Parameters no gradient reached
/// report zeros.
template <typename T>
std::map<std::string, BasicTensor<T>> gradients(const std::vector<BasicParameter<T>*>& params);

}  // namespace dualgan
