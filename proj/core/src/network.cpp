#include "ftol/network.hpp"

#include <cmath>
#include <random>

#include "ftol/random.hpp"

namespace ftol {

namespace {

template <typename T>
BasicTensor<T> flatten_logits(BasicTensor<T> out, std::size_t classes) {
  if (out.rank() != 4 || out.dim(1) != classes || out.dim(2) != 1 ||
      out.dim(3) != 1) {
    throw ShapeError("network output " + shape_string(out.shape()) +
                     " is not (n, " + std::to_string(classes) + ", 1, 1)");
  }
  out.reshape(Shape{out.dim(0), classes});
  return out;
}

template <typename T>
bool flattens(const BasicConvLayer<T>& conv, const BasicTensor<T>& x) {
  return x.rank() == 4 && conv.kernel_h() == 1 && conv.kernel_w() == 1 &&
         x.dim(1) != conv.in_channels() &&
         x.dim(1) * x.dim(2) * x.dim(3) == conv.in_channels();
}

template <typename T>
BasicTensor<T> conv_input(const BasicConvLayer<T>& conv,
                          const BasicTensor<T>& x) {
  if (!flattens(conv, x)) return x;
  BasicTensor<T> flat = x;
  flat.reshape(Shape{x.dim(0), conv.in_channels(), 1, 1});
  return flat;
}

}  // namespace

template <typename T>
void NetworkGradients<T>::accumulate(const NetworkGradients& other) {
  if (layers.empty()) {
    *this = other;
    return;
  }
  if (layers.size() != other.layers.size()) {
    throw ShapeError("gradient accumulation: layer count mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto dst = layers[i].kernel.data();
    auto src = other.layers[i].kernel.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    for (std::size_t j = 0; j < layers[i].bias.size(); ++j) {
      layers[i].bias[j] += other.layers[i].bias[j];
    }
  }
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::forward(const BasicTensor<T>& input) const {
  BasicTensor<T> x = input;
  for (const auto& layer : layers) {
    if (const auto* conv = std::get_if<BasicConvLayer<T>>(&layer)) {
      x = flattens(*conv, x) ? conv2d_forward(conv_input(*conv, x), *conv)
                             : conv2d_forward(x, *conv);
    } else {
      x = relu_forward(x);
    }
  }
  x.require_finite("network forward");
  return flatten_logits(std::move(x), class_count);
}

template <typename T>
ForwardTrace<T> BasicNetwork<T>::forward_trace(
    const BasicTensor<T>& input) const {
  ForwardTrace<T> trace;
  trace.activations.reserve(layers.size() + 1);
  trace.activations.push_back(input);
  for (const auto& layer : layers) {
    const auto& x = trace.activations.back();
    if (const auto* conv = std::get_if<BasicConvLayer<T>>(&layer)) {
      trace.activations.push_back(conv2d_forward(conv_input(*conv, x), *conv));
    } else {
      trace.activations.push_back(relu_forward(x));
    }
  }
  trace.activations.back().require_finite("network forward");
  return trace;
}

template <typename T>
NetworkGradients<T> BasicNetwork<T>::backward(
    const ForwardTrace<T>& trace, const BasicTensor<T>& grad_logits,
    bool need_input_grad, bool need_param_grads) const {
  if (trace.activations.size() != layers.size() + 1) {
    throw ShapeError("backward: trace does not belong to this network");
  }
  BasicTensor<T> grad = grad_logits;
  grad.reshape(trace.activations.back().shape());

  NetworkGradients<T> result;
  std::size_t conv_count = 0;
  for (const auto& layer : layers) {
    conv_count += std::holds_alternative<BasicConvLayer<T>>(layer) ? 1 : 0;
  }
  if (need_param_grads) result.layers.resize(conv_count);

  // The input gradient of layer 0 is only computed on request.
  for (std::size_t i = layers.size(); i-- > 0;) {
    const auto& x = trace.activations[i];
    const bool want_input = need_input_grad || i > 0;
    if (const auto* conv = std::get_if<BasicConvLayer<T>>(&layers[i])) {
      auto back = conv2d_backward(conv_input(*conv, x), *conv, grad,
                                  want_input, need_param_grads);
      if (want_input) back.grad_input.reshape(x.shape());
      --conv_count;
      if (need_param_grads) {
        result.layers[conv_count] = {std::move(back.grad_kernel),
                                     std::move(back.grad_bias)};
      }
      grad = std::move(back.grad_input);
    } else {
      grad = relu_backward(x, grad);
    }
  }
  if (need_input_grad) result.input = std::move(grad);
  return result;
}

template <typename T>
std::size_t BasicNetwork<T>::param_count() const {
  std::size_t total = 0;
  for (const auto* conv : conv_layers()) total += conv->param_count();
  return total;
}

template <typename T>
std::vector<BasicConvLayer<T>*> BasicNetwork<T>::conv_layers() {
  std::vector<BasicConvLayer<T>*> out;
  for (auto& layer : layers) {
    if (auto* conv = std::get_if<BasicConvLayer<T>>(&layer)) {
      out.push_back(conv);
    }
  }
  return out;
}

template <typename T>
std::vector<const BasicConvLayer<T>*> BasicNetwork<T>::conv_layers() const {
  std::vector<const BasicConvLayer<T>*> out;
  for (const auto& layer : layers) {
    if (const auto* conv = std::get_if<BasicConvLayer<T>>(&layer)) {
      out.push_back(conv);
    }
  }
  return out;
}

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  for (double w : class_weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ConfigError("class weights must be finite and non-negative");
    }
  }
}

template <typename T>
void sgd_step(BasicNetwork<T>& network, const NetworkGradients<T>& grads,
              const SgdConfig& cfg) {
  auto convs = network.conv_layers();
  if (grads.layers.size() != convs.size()) {
    throw ShapeError("sgd_step: " + std::to_string(grads.layers.size()) +
                     " gradient blocks for " + std::to_string(convs.size()) +
                     " conv layers");
  }
  const T lr = static_cast<T>(cfg.learning_rate);
  const T decay = static_cast<T>(cfg.weight_decay);
  const T bias_decay = cfg.decay_biases ? decay : T{};
  for (std::size_t l = 0; l < convs.size(); ++l) {
    auto& layer = *convs[l];
    const auto& g = grads.layers[l];
    if (g.kernel.shape() != layer.kernel.shape() ||
        g.bias.size() != layer.bias.size()) {
      throw ShapeError("sgd_step: gradient shape mismatch in " + layer.name);
    }
    auto w = layer.kernel.data();
    auto gw = g.kernel.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= lr * (gw[i] + decay * w[i]);
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      layer.bias[i] -= lr * (g.bias[i] + bias_decay * layer.bias[i]);
    }
  }
}

template <typename T>
void init_gaussian(BasicNetwork<T>& network, double sigma,
                   std::uint64_t seed) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("initialization sigma must be > 0");
  }
  Rng rng = make_rng(seed, Stream::kInit);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto* layer : network.conv_layers()) {
    for (T& w : layer->kernel.data()) w = static_cast<T>(normal(rng));
    std::fill(layer->bias.begin(), layer->bias.end(), T{});
  }
}

template <typename T>
InputGradient<T> input_gradient(const BasicNetwork<T>& network,
                                const BasicTensor<T>& x,
                                const LossSpec& loss) {
  const std::vector<double> unit(network.class_count, 1.0);
  auto trace = network.forward_trace(x);
  BasicTensor<T> logits = trace.activations.back();
  logits.reshape(Shape{logits.dim(0), network.class_count});
  auto ce = softmax_weighted_ce(logits, loss.labels, unit);
  auto grads = network.backward(trace, ce.grad_logits, true, false);
  return {ce.loss, std::move(logits), std::move(grads.input)};
}

#define FTOL_INSTANTIATE_NETWORK(T)                                          \
  template struct NetworkGradients<T>;                                       \
  template class BasicNetwork<T>;                                            \
  template void sgd_step(BasicNetwork<T>&, const NetworkGradients<T>&,       \
                         const SgdConfig&);                                  \
  template void init_gaussian(BasicNetwork<T>&, double, std::uint64_t);      \
  template InputGradient<T> input_gradient(                                  \
      const BasicNetwork<T>&, const BasicTensor<T>&, const LossSpec&);

FTOL_INSTANTIATE_NETWORK(float)
FTOL_INSTANTIATE_NETWORK(double)

#undef FTOL_INSTANTIATE_NETWORK

}  // namespace ftol
