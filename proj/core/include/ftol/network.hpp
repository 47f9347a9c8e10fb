#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ftol/layers.hpp"

namespace ftol {

struct ReluLayer {
  friend bool operator==(const ReluLayer&, const ReluLayer&) = default;
};

template <typename T>
using BasicLayer = std::variant<BasicConvLayer<T>, ReluLayer>;

template <typename T>
struct ConvGradients {
  BasicTensor<T> kernel;
  std::vector<T> bias;
};

// Parameter gradients for each conv layer in declaration order, plus the
// gradient with respect to the network input when requested.
template <typename T>
struct NetworkGradients {
  std::vector<ConvGradients<T>> layers;
  BasicTensor<T> input;

  void accumulate(const NetworkGradients& other);
};

// Inputs seen by each layer during a forward pass; activations[i] feeds
// layers[i] and activations.back() is the raw network output.
template <typename T>
struct ForwardTrace {
  std::vector<BasicTensor<T>> activations;
};

// Ordered conv/ReLU stack. The terminal conv produces (n, classes, 1, 1)
// which forward() flattens to (n, classes) logits. A 1x1 conv whose c_in
// equals C*H*W of an incoming (n, C, H, W) map consumes it flattened to
// (n, C*H*W, 1, 1).
template <typename T>
class BasicNetwork {
 public:
  std::vector<BasicLayer<T>> layers;
  std::size_t class_count = 10;

  BasicTensor<T> forward(const BasicTensor<T>& input) const;
  ForwardTrace<T> forward_trace(const BasicTensor<T>& input) const;

  // Backpropagates grad_logits of shape (n, classes) through the trace.
  NetworkGradients<T> backward(const ForwardTrace<T>& trace,
                               const BasicTensor<T>& grad_logits,
                               bool need_input_grad,
                               bool need_param_grads = true) const;

  std::size_t param_count() const;
  std::vector<BasicConvLayer<T>*> conv_layers();
  std::vector<const BasicConvLayer<T>*> conv_layers() const;

  template <typename U>
  BasicNetwork<U> cast() const {
    BasicNetwork<U> out;
    out.class_count = class_count;
    for (const auto& layer : layers) {
      if (const auto* conv = std::get_if<BasicConvLayer<T>>(&layer)) {
        out.layers.emplace_back(conv->template cast<U>());
      } else {
        out.layers.emplace_back(ReluLayer{});
      }
    }
    return out;
  }

  friend bool operator==(const BasicNetwork&, const BasicNetwork&) = default;
};

using Network = BasicNetwork<float>;
using Network64 = BasicNetwork<double>;

struct SgdConfig {
  double learning_rate = 1e-2;
  double weight_decay = 0.0;
  std::size_t batch_size = 128;
  std::size_t epochs = 50;
  std::vector<double> class_weights = std::vector<double>(10, 1.0);
  std::uint64_t seed = 0;
  bool decay_biases = true;

  void validate() const;
};

// w <- w - lr * (g + lambda * w) for every parameter.
template <typename T>
void sgd_step(BasicNetwork<T>& network, const NetworkGradients<T>& grads,
              const SgdConfig& cfg);

// Kernels ~ N(0, sigma^2) from a seeded generator, biases zero.
template <typename T>
void init_gaussian(BasicNetwork<T>& network, double sigma, std::uint64_t seed);

enum class LossKind { kTrueLabel, kTargetLabel };

// Unweighted cross-entropy against either the true labels or attack targets.
struct LossSpec {
  LossKind kind = LossKind::kTrueLabel;
  std::vector<int> labels;

  static LossSpec ce_true(std::vector<int> y) {
    return {LossKind::kTrueLabel, std::move(y)};
  }
  static LossSpec ce_target(std::vector<int> t) {
    return {LossKind::kTargetLabel, std::move(t)};
  }
};

template <typename T>
struct InputGradient {
  double loss = 0.0;
  BasicTensor<T> logits;
  BasicTensor<T> grad;
};

// Gradient of the batch-mean cross-entropy with respect to the input.
template <typename T>
InputGradient<T> input_gradient(const BasicNetwork<T>& network,
                                const BasicTensor<T>& x, const LossSpec& loss);

}  // namespace ftol
