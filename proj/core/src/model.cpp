#include "ftol/model.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include "ftol/parallel.hpp"

namespace ftol {

Network paper_cnn_skeleton() {
  Network net;
  net.class_count = kClassCount;
  net.layers.emplace_back(ConvLayer("Conv1", 32, 1, 8, 8, 2, Padding::kSame));
  net.layers.emplace_back(ReluLayer{});
  net.layers.emplace_back(ConvLayer("Conv2", 64, 32, 6, 6, 2, Padding::kValid));
  net.layers.emplace_back(ReluLayer{});
  net.layers.emplace_back(ConvLayer("Conv3", 64, 64, 5, 5, 1, Padding::kValid));
  net.layers.emplace_back(ReluLayer{});
  net.layers.emplace_back(
      ConvLayer("Fc", kClassCount, 256, 1, 1, 1, Padding::kValid));
  return net;
}

Network build_paper_cnn(std::uint64_t seed, double sigma) {
  Network net = paper_cnn_skeleton();
  init_gaussian(net, sigma, seed);
  return net;
}

Prediction predict(const Network& network, const Tensor& x_batch,
                   int threads) {
  if (x_batch.rank() != 4) {
    throw ShapeError("predict expects an NCHW batch, got " +
                     shape_string(x_batch.shape()));
  }
  const std::size_t n = x_batch.dim(0);
  const std::size_t k = network.class_count;
  Shape item_shape(x_batch.shape().begin() + 1, x_batch.shape().end());
  item_shape.insert(item_shape.begin(), 1);

  Prediction out;
  out.labels.resize(n);
  out.probabilities = Tensor(Shape{n, k});
  parallel_for(n, threads, [&](std::size_t i) {
    auto src = x_batch.item(i);
    Tensor one(item_shape, std::vector<float>(src.begin(), src.end()));
    Tensor probs = softmax(network.forward(one));
    std::copy(probs.data().begin(), probs.data().end(),
              out.probabilities.item(i).begin());
    out.labels[i] = argmax(std::span<const float>(out.probabilities.item(i)));
  });
  return out;
}

namespace {

template <typename T>
double margin_impl(std::span<const T> p) {
  if (p.size() < 2) {
    throw ConfigError("margin needs at least two class probabilities");
  }
  double first = -1.0, second = -1.0;
  for (T v : p) {
    const double x = static_cast<double>(v);
    if (x > first) {
      second = first;
      first = x;
    } else if (x > second) {
      second = x;
    }
  }
  return std::clamp(first - second, 0.0, 1.0);
}

constexpr std::string_view kModelMagic = "FTM1";

void put_f32_le(std::ostream& os, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  const char bytes[4] = {static_cast<char>(bits & 0xff),
                         static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff),
                         static_cast<char>((bits >> 24) & 0xff)};
  os.write(bytes, 4);
}

float get_f32_le(const unsigned char* b) {
  const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                             (static_cast<std::uint32_t>(b[1]) << 8) |
                             (static_cast<std::uint32_t>(b[2]) << 16) |
                             (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

std::string next_line(std::istream& is, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(is, line)) {
    throw TruncationError(path.string() + ": model header ends early");
  }
  return line;
}

}  // namespace

double margin(std::span<const float> probabilities) {
  return margin_impl(probabilities);
}
double margin(std::span<const double> probabilities) {
  return margin_impl(probabilities);
}

void save_model(const std::filesystem::path& path, const Network& network,
                const ModelMetadata& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kModelMagic << '\n';
  os << "classes " << network.class_count << '\n';
  os << "seed " << meta.seed << '\n';
  os << "epochs " << meta.epochs << '\n';
  os << "layers " << network.layers.size() << '\n';
  for (const auto& layer : network.layers) {
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      os << "conv " << conv->name << ' ' << conv->out_channels() << ' '
         << conv->in_channels() << ' ' << conv->kernel_h() << ' '
         << conv->kernel_w() << ' ' << conv->stride << ' '
         << padding_name(conv->padding) << '\n';
    } else {
      os << "relu\n";
    }
  }
  os << "params " << network.param_count() << '\n';
  os << "data\n";
  for (const auto* conv : network.conv_layers()) {
    for (float v : conv->kernel.data()) put_f32_le(os, v);
    for (float v : conv->bias) put_f32_le(os, v);
  }
  if (!os) throw IoError("failed writing " + path.string());
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model " + path.string());
  if (next_line(is, path) != kModelMagic) {
    throw FormatError(path.string() + ": not an FTM1 model file");
  }
  LoadedModel out;
  auto keyed = [&](const std::string& key) {
    std::istringstream ls(next_line(is, path));
    std::string k;
    std::uint64_t v = 0;
    if (!(ls >> k >> v) || k != key) {
      throw FormatError(path.string() + ": expected '" + key + "' line");
    }
    return v;
  };
  out.network.class_count = keyed("classes");
  out.meta.seed = keyed("seed");
  out.meta.epochs = keyed("epochs");
  const std::uint64_t layer_count = keyed("layers");
  for (std::uint64_t i = 0; i < layer_count; ++i) {
    std::istringstream ls(next_line(is, path));
    std::string kind;
    ls >> kind;
    if (kind == "relu") {
      out.network.layers.emplace_back(ReluLayer{});
    } else if (kind == "conv") {
      std::string name, padding;
      std::size_t c_out = 0, c_in = 0, h = 0, w = 0, stride = 0;
      if (!(ls >> name >> c_out >> c_in >> h >> w >> stride >> padding) ||
          stride == 0) {
        throw FormatError(path.string() + ": malformed conv line " +
                          std::to_string(i));
      }
      out.network.layers.emplace_back(
          ConvLayer(name, c_out, c_in, h, w, stride, parse_padding(padding)));
    } else {
      throw FormatError(path.string() + ": unknown layer kind '" + kind + "'");
    }
  }
  const std::uint64_t params = keyed("params");
  if (params != out.network.param_count()) {
    throw FormatError(path.string() + ": header declares " +
                      std::to_string(params) + " parameters, layers hold " +
                      std::to_string(out.network.param_count()));
  }
  if (next_line(is, path) != "data") {
    throw FormatError(path.string() + ": missing 'data' marker");
  }
  std::vector<unsigned char> blob(params * 4);
  is.read(reinterpret_cast<char*>(blob.data()),
          static_cast<std::streamsize>(blob.size()));
  if (static_cast<std::size_t>(is.gcount()) != blob.size()) {
    throw TruncationError(path.string() + ": parameter payload truncated");
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after parameters");
  }
  const unsigned char* cursor = blob.data();
  for (auto* conv : out.network.conv_layers()) {
    for (float& v : conv->kernel.data()) {
      v = get_f32_le(cursor);
      cursor += 4;
    }
    for (float& v : conv->bias) {
      v = get_f32_le(cursor);
      cursor += 4;
    }
  }
  return out;
}

}  // namespace ftol
