#include "ftol/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ftol {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::string padding_name(Padding padding) {
  return padding == Padding::kSame ? "SAME" : "VALID";
}

Padding parse_padding(const std::string& name) {
  if (name == "SAME") return Padding::kSame;
  if (name == "VALID") return Padding::kValid;
  throw FormatError("unknown padding '" + name + "'");
}

ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w,
                           std::size_t kernel_h, std::size_t kernel_w,
                           std::size_t stride, Padding padding,
                           const std::string& layer_name) {
  if (stride == 0) throw ShapeError(layer_name + ": stride must be positive");
  ConvGeometry g;
  if (padding == Padding::kSame) {
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    const std::size_t need_h = (g.out_h - 1) * stride + kernel_h;
    const std::size_t need_w = (g.out_w - 1) * stride + kernel_w;
    g.pad_top = need_h > in_h ? (need_h - in_h) / 2 : 0;
    g.pad_left = need_w > in_w ? (need_w - in_w) / 2 : 0;
  } else {
    if (in_h < kernel_h || in_w < kernel_w) {
      throw ShapeError(layer_name + ": VALID input " + std::to_string(in_h) +
                       "x" + std::to_string(in_w) + " is smaller than kernel " +
                       std::to_string(kernel_h) + "x" +
                       std::to_string(kernel_w));
    }
    g.out_h = (in_h - kernel_h) / stride + 1;
    g.out_w = (in_w - kernel_w) / stride + 1;
  }
  return g;
}

namespace {

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T s0{}, s1{}, s2{}, s3{};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

struct Plan {
  std::size_t channels, in_h, in_w, kh, kw, stride;
  ConvGeometry geo;
  std::size_t patch() const { return channels * kh * kw; }
  std::size_t positions() const { return geo.out_h * geo.out_w; }
};

template <typename T>
Plan make_plan(const BasicTensor<T>& input, const BasicConvLayer<T>& layer) {
  if (input.rank() != 4) {
    throw ShapeError(layer.name + ": expected NCHW input, got " +
                     shape_string(input.shape()));
  }
  if (layer.kernel.rank() != 4 ||
      layer.bias.size() != layer.out_channels()) {
    throw ShapeError(layer.name + ": malformed kernel " +
                     shape_string(layer.kernel.shape()) + " with " +
                     std::to_string(layer.bias.size()) + " biases");
  }
  if (input.dim(1) != layer.in_channels()) {
    throw ShapeError(layer.name + ": input has " +
                     std::to_string(input.dim(1)) +
                     " channels, kernel expects " +
                     std::to_string(layer.in_channels()));
  }
  Plan p{input.dim(1),      input.dim(2),      input.dim(3),
         layer.kernel_h(),  layer.kernel_w(),  layer.stride,
         {}};
  p.geo = conv_geometry(p.in_h, p.in_w, p.kh, p.kw, p.stride, layer.padding,
                        layer.name);
  return p;
}

// rows[p][k]: receptive field of output position p, k ordered (c, i, j) to
// match the kernel layout. Out-of-image taps are zero.
template <typename T>
void im2row(const T* image, const Plan& p, T* rows) {
  const std::size_t k_len = p.patch();
  for (std::size_t oy = 0; oy < p.geo.out_h; ++oy) {
    for (std::size_t ox = 0; ox < p.geo.out_w; ++ox) {
      T* row = rows + (oy * p.geo.out_w + ox) * k_len;
      const long y0 = static_cast<long>(oy * p.stride) -
                      static_cast<long>(p.geo.pad_top);
      const long x0 = static_cast<long>(ox * p.stride) -
                      static_cast<long>(p.geo.pad_left);
      for (std::size_t c = 0; c < p.channels; ++c) {
        const T* plane = image + c * p.in_h * p.in_w;
        for (std::size_t i = 0; i < p.kh; ++i) {
          const long y = y0 + static_cast<long>(i);
          T* dst = row + (c * p.kh + i) * p.kw;
          if (y < 0 || y >= static_cast<long>(p.in_h)) {
            std::fill(dst, dst + p.kw, T{});
            continue;
          }
          for (std::size_t j = 0; j < p.kw; ++j) {
            const long x = x0 + static_cast<long>(j);
            dst[j] = (x < 0 || x >= static_cast<long>(p.in_w))
                         ? T{}
                         : plane[y * static_cast<long>(p.in_w) + x];
          }
        }
      }
    }
  }
}

template <typename T>
void row2im_add(const T* rows, const Plan& p, T* image) {
  const std::size_t k_len = p.patch();
  for (std::size_t oy = 0; oy < p.geo.out_h; ++oy) {
    for (std::size_t ox = 0; ox < p.geo.out_w; ++ox) {
      const T* row = rows + (oy * p.geo.out_w + ox) * k_len;
      const long y0 = static_cast<long>(oy * p.stride) -
                      static_cast<long>(p.geo.pad_top);
      const long x0 = static_cast<long>(ox * p.stride) -
                      static_cast<long>(p.geo.pad_left);
      for (std::size_t c = 0; c < p.channels; ++c) {
        T* plane = image + c * p.in_h * p.in_w;
        for (std::size_t i = 0; i < p.kh; ++i) {
          const long y = y0 + static_cast<long>(i);
          if (y < 0 || y >= static_cast<long>(p.in_h)) continue;
          const T* src = row + (c * p.kh + i) * p.kw;
          for (std::size_t j = 0; j < p.kw; ++j) {
            const long x = x0 + static_cast<long>(j);
            if (x < 0 || x >= static_cast<long>(p.in_w)) continue;
            plane[y * static_cast<long>(p.in_w) + x] += src[j];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input,
                              const BasicConvLayer<T>& layer) {
  const Plan p = make_plan(input, layer);
  const std::size_t batch = input.dim(0);
  const std::size_t c_out = layer.out_channels();
  const std::size_t k_len = p.patch();
  const std::size_t n_pos = p.positions();
  BasicTensor<T> out(Shape{batch, c_out, p.geo.out_h, p.geo.out_w});
  std::vector<T> rows(n_pos * k_len);
  const T* w = layer.kernel.data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    im2row(input.item(n).data(), p, rows.data());
    T* dst = out.item(n).data();
    for (std::size_t co = 0; co < c_out; ++co) {
      const T* wc = w + co * k_len;
      for (std::size_t q = 0; q < n_pos; ++q) {
        dst[co * n_pos + q] = layer.bias[co] + dot(wc, &rows[q * k_len], k_len);
      }
    }
  }
  return out;
}

template <typename T>
ConvBackward<T> conv2d_backward(const BasicTensor<T>& input,
                                const BasicConvLayer<T>& layer,
                                const BasicTensor<T>& upstream_grad,
                                bool need_input_grad, bool need_param_grad) {
  const Plan p = make_plan(input, layer);
  const std::size_t batch = input.dim(0);
  const std::size_t c_out = layer.out_channels();
  const Shape expected{batch, c_out, p.geo.out_h, p.geo.out_w};
  if (upstream_grad.shape() != expected) {
    throw ShapeError(layer.name + ": upstream gradient " +
                     shape_string(upstream_grad.shape()) + " != output " +
                     shape_string(expected));
  }
  const std::size_t k_len = p.patch();
  const std::size_t n_pos = p.positions();

  ConvBackward<T> out;
  if (need_param_grad) {
    out.grad_kernel = BasicTensor<T>(layer.kernel.shape());
    out.grad_bias.assign(c_out, T{});
  }
  if (need_input_grad) out.grad_input = BasicTensor<T>(input.shape());

  std::vector<T> rows;
  std::vector<T> drows;
  if (need_param_grad) rows.resize(n_pos * k_len);
  if (need_input_grad) drows.resize(n_pos * k_len);
  const T* w = layer.kernel.data().data();
  T* gw = need_param_grad ? out.grad_kernel.data().data() : nullptr;

  for (std::size_t n = 0; n < batch; ++n) {
    const T* g = upstream_grad.item(n).data();
    if (need_param_grad) im2row(input.item(n).data(), p, rows.data());
    for (std::size_t co = 0; need_param_grad && co < c_out; ++co) {
      const T* gc = g + co * n_pos;
      T bias_acc{};
      T* gwc = gw + co * k_len;
      for (std::size_t q = 0; q < n_pos; ++q) {
        bias_acc += gc[q];
        if (gc[q] != T{}) axpy(gc[q], &rows[q * k_len], gwc, k_len);
      }
      out.grad_bias[co] += bias_acc;
    }
    if (need_input_grad) {
      std::fill(drows.begin(), drows.end(), T{});
      for (std::size_t q = 0; q < n_pos; ++q) {
        T* dr = &drows[q * k_len];
        for (std::size_t co = 0; co < c_out; ++co) {
          const T gv = g[co * n_pos + q];
          if (gv != T{}) axpy(gv, w + co * k_len, dr, k_len);
        }
      }
      row2im_add(drows.data(), p, out.grad_input.item(n).data());
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.data()) v = v > T{} ? v : T{};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input,
                             const BasicTensor<T>& upstream_grad) {
  if (input.shape() != upstream_grad.shape()) {
    throw ShapeError("relu: upstream gradient " +
                     shape_string(upstream_grad.shape()) + " != input " +
                     shape_string(input.shape()));
  }
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = input[i] > T{} ? upstream_grad[i] : T{};
  }
  return out;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax expects (n, k) logits, got " +
                     shape_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  BasicTensor<T> out(logits.shape());
  std::vector<double> e(k);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data().data() + i * k;
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      e[j] = std::exp(static_cast<double>(row[j]) - m);
      z += e[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
      out[i * k + j] = static_cast<T>(e[j] / z);
    }
  }
  return out;
}

template <typename T>
LossResult<T> softmax_weighted_ce(const BasicTensor<T>& logits,
                                  std::span<const int> labels,
                                  std::span<const double> class_weights) {
  if (logits.rank() != 2) {
    throw ShapeError("cross-entropy expects (n, k) logits, got " +
                     shape_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("cross-entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  if (class_weights.size() != k) {
    throw ShapeError("cross-entropy: " + std::to_string(class_weights.size()) +
                     " class weights for " + std::to_string(k) + " classes");
  }
  LossResult<T> result;
  result.grad_logits = BasicTensor<T>(logits.shape());
  std::vector<double> e(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw LabelRangeError("cross-entropy: label " + std::to_string(y) +
                            " outside 0.." + std::to_string(k - 1));
    }
    const T* row = logits.data().data() + i * k;
    const double m = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      e[j] = std::exp(static_cast<double>(row[j]) - m);
      z += e[j];
    }
    const double w = class_weights[static_cast<std::size_t>(y)];
    const double log_p = static_cast<double>(row[y]) - m - std::log(z);
    total += -w * log_p;
    for (std::size_t j = 0; j < k; ++j) {
      const double target = j == static_cast<std::size_t>(y) ? 1.0 : 0.0;
      result.grad_logits[i * k + j] =
          static_cast<T>(w * (e[j] / z - target) / static_cast<double>(n));
    }
  }
  result.loss = total / static_cast<double>(n);
  if (!std::isfinite(result.loss)) {
    throw NumericalError("cross-entropy loss is not finite");
  }
  return result;
}

#define FTOL_INSTANTIATE_LAYERS(T)                                           \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&,              \
                                         const BasicConvLayer<T>&);          \
  template ConvBackward<T> conv2d_backward(                                  \
      const BasicTensor<T>&, const BasicConvLayer<T>&, const BasicTensor<T>&, \
      bool, bool);                                                               \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);               \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&,               \
                                        const BasicTensor<T>&);              \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                    \
  template LossResult<T> softmax_weighted_ce(                                \
      const BasicTensor<T>&, std::span<const int>, std::span<const double>);

FTOL_INSTANTIATE_LAYERS(float)
FTOL_INSTANTIATE_LAYERS(double)

#undef FTOL_INSTANTIATE_LAYERS

}  // namespace ftol
