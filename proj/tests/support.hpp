#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ftol/layers.hpp"
#include "ftol/network.hpp"

namespace ftol::testing {

// Direct quadruple loop over output pixels; shares no code with the im2row
// path. SAME padding puts the odd pixel at the bottom/right.
inline Tensor64 naive_conv(const Tensor64& x, const BasicConvLayer<double>& l) {
  const std::size_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t c_out = l.kernel.dim(0), kh = l.kernel.dim(2),
                    kw = l.kernel.dim(3), s = l.stride;
  std::size_t oh = 0, ow = 0;
  long pt = 0, pl = 0;
  if (l.padding == Padding::kSame) {
    oh = (h + s - 1) / s;
    ow = (w + s - 1) / s;
    const long th = std::max<long>(0, static_cast<long>((oh - 1) * s + kh) -
                                          static_cast<long>(h));
    const long tw = std::max<long>(0, static_cast<long>((ow - 1) * s + kw) -
                                          static_cast<long>(w));
    pt = th / 2;
    pl = tw / 2;
  } else {
    oh = (h - kh) / s + 1;
    ow = (w - kw) / s + 1;
  }
  Tensor64 y(Shape{n, c_out, oh, ow});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < c_out; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = l.bias[o];
          for (std::size_t c = 0; c < c_in; ++c)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long r = static_cast<long>(i * s + u) - pt;
                const long q = static_cast<long>(j * s + v) - pl;
                if (r < 0 || q < 0 || r >= static_cast<long>(h) ||
                    q >= static_cast<long>(w))
                  continue;
                acc += x.at(b, c, static_cast<std::size_t>(r),
                            static_cast<std::size_t>(q)) *
                       l.kernel.at(o, c, u, v);
              }
          y.at(b, o, i, j) = acc;
        }
  return y;
}

template <typename T>
void fill_normal(std::span<T> values, std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  for (T& v : values) v = static_cast<T>(dist(rng));
}

template <typename T>
BasicTensor<T> random_tensor(Shape shape, std::mt19937_64& rng,
                             double sigma = 1.0) {
  BasicTensor<T> t(std::move(shape));
  fill_normal(t.data(), rng, sigma);
  return t;
}

struct TinyCase {
  Network64 network;
  Tensor64 input;
  std::vector<int> labels;
  std::vector<double> weights;
};

// conv -> relu [-> conv -> relu] -> flattening 1x1 conv, at most 1000
// parameters, with random strides, paddings and nonzero biases.
inline TinyCase random_tiny_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) {
    return static_cast<std::size_t>(
        std::uniform_int_distribution<int>(lo, hi)(rng));
  };
  for (;;) {
    TinyCase tc;
    const std::size_t batch = pick(1, 3), c_in = pick(1, 2), side = pick(5, 8);
    const std::size_t classes = pick(2, 4);
    tc.network.class_count = classes;
    std::size_t c = c_in, h = side, w = side;
    const int convs = static_cast<int>(pick(1, 2));
    bool ok = true;
    for (int k = 0; k < convs && ok; ++k) {
      const std::size_t c_out = pick(2, 3), kh = pick(1, 3), kw = pick(1, 3),
                        stride = pick(1, 2);
      const Padding pad = pick(0, 1) ? Padding::kSame : Padding::kValid;
      if (pad == Padding::kValid && (h < kh || w < kw)) {
        ok = false;
        break;
      }
      auto g = conv_geometry(h, w, kh, kw, stride, pad);
      BasicConvLayer<double> layer("c" + std::to_string(k), c_out, c, kh, kw,
                                   stride, pad);
      fill_normal(layer.kernel.data(), rng, 0.5);
      fill_normal(std::span<double>(layer.bias), rng, 0.2);
      tc.network.layers.emplace_back(std::move(layer));
      tc.network.layers.emplace_back(ReluLayer{});
      c = c_out;
      h = g.out_h;
      w = g.out_w;
    }
    if (!ok) continue;
    BasicConvLayer<double> fc("fc", classes, c * h * w, 1, 1, 1,
                              Padding::kValid);
    fill_normal(fc.kernel.data(), rng, 0.5);
    fill_normal(std::span<double>(fc.bias), rng, 0.2);
    tc.network.layers.emplace_back(std::move(fc));
    if (tc.network.param_count() > 1000) continue;
    tc.input = random_tensor<double>(Shape{batch, c_in, side, side}, rng);
    for (std::size_t i = 0; i < batch; ++i) {
      tc.labels.push_back(static_cast<int>(pick(0, static_cast<int>(classes) - 1)));
    }
    std::uniform_real_distribution<double> wd(0.5, 2.0);
    for (std::size_t k = 0; k < classes; ++k) tc.weights.push_back(wd(rng));
    return tc;
  }
}

inline double tiny_loss(const TinyCase& tc, const Network64& net,
                        const Tensor64& x) {
  return softmax_weighted_ce(net.forward(x), tc.labels, tc.weights).loss;
}

// |a - n| / max(|a|, |n|, 1e-4): relative where the gradient is material,
// absolute below 1e-4 so vanishing gradients do not amplify rounding.
inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-4});
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Central differences with step 1e-5 against network backward, over every
// parameter and every input value.
inline GradientCheck check_gradients(const TinyCase& tc) {
  constexpr double h = 1e-5;
  auto trace = tc.network.forward_trace(tc.input);
  Tensor64 logits = trace.activations.back();
  logits.reshape(Shape{logits.dim(0), tc.network.class_count});
  auto ce = softmax_weighted_ce(logits, tc.labels, tc.weights);
  auto grads = tc.network.backward(trace, ce.grad_logits, true);

  GradientCheck out;
  auto record = [&](double analytic, double numeric) {
    out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic, numeric));
    ++out.checked;
  };

  Network64 net = tc.network;
  auto layers = net.conv_layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    auto& kernel = layers[li]->kernel;
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      const double saved = kernel[i];
      kernel[i] = saved + h;
      const double up = tiny_loss(tc, net, tc.input);
      kernel[i] = saved - h;
      const double down = tiny_loss(tc, net, tc.input);
      kernel[i] = saved;
      record(grads.layers[li].kernel[i], (up - down) / (2 * h));
    }
    auto& bias = layers[li]->bias;
    for (std::size_t i = 0; i < bias.size(); ++i) {
      const double saved = bias[i];
      bias[i] = saved + h;
      const double up = tiny_loss(tc, net, tc.input);
      bias[i] = saved - h;
      const double down = tiny_loss(tc, net, tc.input);
      bias[i] = saved;
      record(grads.layers[li].bias[i], (up - down) / (2 * h));
    }
  }
  Tensor64 x = tc.input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = tiny_loss(tc, net, x);
    x[i] = saved - h;
    const double down = tiny_loss(tc, net, x);
    x[i] = saved;
    record(grads.input[i], (up - down) / (2 * h));
  }
  return out;
}

// Brute-force sum over nonzero cells of p log2(p / (p_t p_y)).
template <typename Joint>
double brute_force_mi(const Joint& joint) {
  const std::size_t k = joint.classes();
  const double n = static_cast<double>(joint.total());
  std::vector<double> pt(k, 0.0), py(k, 0.0);
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t y = 0; y < k; ++y) {
      pt[t] += joint.at(t, y) / n;
      py[y] += joint.at(t, y) / n;
    }
  double mi = 0.0;
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t y = 0; y < k; ++y) {
      if (joint.at(t, y) == 0) continue;
      const double p = joint.at(t, y) / n;
      mi += p * std::log2(p / (pt[t] * py[y]));
    }
  return mi;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ftol-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ftol::testing
