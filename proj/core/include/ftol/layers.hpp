#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ftol/tensor.hpp"

namespace ftol {

enum class Padding { kSame, kValid };

std::string padding_name(Padding padding);
Padding parse_padding(const std::string& name);

// Output extent and leading padding for one convolution. SAME splits the
// total padding with the extra pixel at the bottom/right.
struct ConvGeometry {
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::size_t pad_top = 0;
  std::size_t pad_left = 0;
};

ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w,
                           std::size_t kernel_h, std::size_t kernel_w,
                           std::size_t stride, Padding padding,
                           const std::string& layer_name = "conv");

template <typename T>
struct BasicConvLayer {
  std::string name;
  BasicTensor<T> kernel;  // (c_out, c_in, h, w)
  std::vector<T> bias;    // c_out
  std::size_t stride = 1;
  Padding padding = Padding::kValid;

  BasicConvLayer() = default;
  BasicConvLayer(std::string layer_name, std::size_t c_out, std::size_t c_in,
                 std::size_t h, std::size_t w, std::size_t layer_stride,
                 Padding layer_padding)
      : name(std::move(layer_name)),
        kernel(Shape{c_out, c_in, h, w}),
        bias(c_out, T{}),
        stride(layer_stride),
        padding(layer_padding) {}

  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(1); }
  std::size_t kernel_h() const { return kernel.dim(2); }
  std::size_t kernel_w() const { return kernel.dim(3); }
  std::size_t param_count() const { return kernel.size() + bias.size(); }

  template <typename U>
  BasicConvLayer<U> cast() const {
    BasicConvLayer<U> out;
    out.name = name;
    out.kernel = kernel.template cast<U>();
    out.bias.assign(bias.begin(), bias.end());
    out.stride = stride;
    out.padding = padding;
    return out;
  }

  friend bool operator==(const BasicConvLayer&,
                         const BasicConvLayer&) = default;
};

using ConvLayer = BasicConvLayer<float>;

template <typename T>
struct ConvBackward {
  BasicTensor<T> grad_input;
  BasicTensor<T> grad_kernel;
  std::vector<T> grad_bias;
};

// Cross-correlation over an NCHW batch.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input,
                              const BasicConvLayer<T>& layer);

// Gradients of sum(upstream_grad * conv2d_forward(input, layer)).
// grad_input is left empty when need_input_grad is false; the parameter
// gradients are left empty when need_param_grad is false.
template <typename T>
ConvBackward<T> conv2d_backward(const BasicTensor<T>& input,
                                const BasicConvLayer<T>& layer,
                                const BasicTensor<T>& upstream_grad,
                                bool need_input_grad = true,
                                bool need_param_grad = true);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);

// Passes upstream where input > 0; the subgradient at exactly 0 is 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input,
                             const BasicTensor<T>& upstream_grad);

template <typename T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> grad_logits;
};

// Mean over the batch of w[y_i] * -log softmax(logits_i)[y_i].
// Softmax is evaluated in double with max subtraction.
template <typename T>
LossResult<T> softmax_weighted_ce(const BasicTensor<T>& logits,
                                  std::span<const int> labels,
                                  std::span<const double> class_weights);

// Row-wise softmax of an (n, k) tensor.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

}  // namespace ftol
