#include "ftol/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "ftol/random.hpp"

namespace ftol {

namespace {

constexpr std::array<char, 4> kContainerMagic = {'F', 'T', 'C', '1'};
constexpr std::size_t kPixels = 32 * 32;

void check_label(int label, std::size_t index) {
  if (label < 0 || label > 9) {
    throw LabelRangeError("label " + std::to_string(label) + " at index " +
                          std::to_string(index) + " is outside 0..9");
  }
}

}  // namespace

void RawDataset::validate() const {
  if (channels != 1 && channels != 3) {
    throw FormatError("channel count must be 1 or 3, got " +
                      std::to_string(channels));
  }
  if (count < 1) throw FormatError("dataset holds no images");
  if (pixels.size() != count * image_bytes() || labels.size() != count) {
    throw FormatError("dataset buffers do not match " +
                      std::to_string(count) + " images");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) check_label(labels[i], i);
}

RawDataset load_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open container " + path.string());
  std::array<char, 4> magic{};
  is.read(magic.data(), 4);
  if (is.gcount() != 4 || magic != kContainerMagic) {
    throw FormatError(path.string() + ": bad magic, expected FTC1");
  }
  unsigned char header[5];
  is.read(reinterpret_cast<char*>(header), 5);
  if (is.gcount() != 5) {
    throw TruncationError(path.string() + ": header truncated");
  }
  RawDataset raw;
  raw.channels = header[0];
  raw.count = static_cast<std::size_t>(header[1]) |
              (static_cast<std::size_t>(header[2]) << 8) |
              (static_cast<std::size_t>(header[3]) << 16) |
              (static_cast<std::size_t>(header[4]) << 24);
  if (raw.channels != 1 && raw.channels != 3) {
    throw FormatError(path.string() + ": channel count " +
                      std::to_string(raw.channels) + " is not 1 or 3");
  }
  if (raw.count == 0) throw FormatError(path.string() + ": zero images");

  const auto total = std::filesystem::file_size(path);
  const std::uintmax_t expected = 9 + raw.count * (raw.image_bytes() + 1);
  if (total < expected) {
    throw TruncationError(path.string() + ": declares " +
                          std::to_string(raw.count) + " images (" +
                          std::to_string(expected) + " bytes) but holds " +
                          std::to_string(total) + " bytes");
  }
  if (total > expected) {
    throw FormatError(path.string() + ": " + std::to_string(total - expected) +
                      " trailing bytes after labels");
  }
  raw.pixels.resize(raw.count * raw.image_bytes());
  is.read(reinterpret_cast<char*>(raw.pixels.data()),
          static_cast<std::streamsize>(raw.pixels.size()));
  std::vector<unsigned char> labels(raw.count);
  is.read(reinterpret_cast<char*>(labels.data()),
          static_cast<std::streamsize>(labels.size()));
  if (!is) throw TruncationError(path.string() + ": payload truncated");
  raw.labels.assign(labels.begin(), labels.end());
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    check_label(raw.labels[i], i);
  }
  return raw;
}

void save_container(const RawDataset& raw, const std::filesystem::path& path) {
  raw.validate();
  if (raw.count > 0xffffffffULL) throw FormatError("too many images for u32");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kContainerMagic.data(), 4);
  const auto n = static_cast<std::uint32_t>(raw.count);
  const unsigned char header[5] = {
      static_cast<unsigned char>(raw.channels),
      static_cast<unsigned char>(n & 0xff),
      static_cast<unsigned char>((n >> 8) & 0xff),
      static_cast<unsigned char>((n >> 16) & 0xff),
      static_cast<unsigned char>((n >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(header), 5);
  os.write(reinterpret_cast<const char*>(raw.pixels.data()),
           static_cast<std::streamsize>(raw.pixels.size()));
  std::vector<unsigned char> labels(raw.labels.begin(), raw.labels.end());
  os.write(reinterpret_cast<const char*>(labels.data()),
           static_cast<std::streamsize>(labels.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

Tensor ntsc_greyscale(const RawDataset& rgb) {
  if (rgb.channels != 3) {
    throw ConfigError("NTSC greyscale needs 3 channels, got " +
                      std::to_string(rgb.channels));
  }
  Tensor out(Shape{rgb.count, 1, 32, 32});
  for (std::size_t n = 0; n < rgb.count; ++n) {
    const std::uint8_t* img = rgb.pixels.data() + n * 3 * kPixels;
    float* dst = out.item(n).data();
    for (std::size_t p = 0; p < kPixels; ++p) {
      const double grey = 0.299 * img[p] + 0.587 * img[kPixels + p] +
                          0.114 * img[2 * kPixels + p];
      dst[p] = static_cast<float>(grey);
    }
  }
  return out;
}

Tensor greyscale(const RawDataset& raw) {
  if (raw.channels == 3) return ntsc_greyscale(raw);
  if (raw.channels != 1) {
    throw ConfigError("unsupported channel count " +
                      std::to_string(raw.channels));
  }
  return Tensor(Shape{raw.count, 1, 32, 32},
                std::vector<float>(raw.pixels.begin(), raw.pixels.end()));
}

namespace {

double mean_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

Tensor standardize_per_image(Tensor images) {
  for (std::size_t n = 0; n < images.dim(0); ++n) {
    auto img = images.item(n);
    const double mean = mean_of(img);
    double var = 0.0;
    for (float x : img) var += (x - mean) * (x - mean);
    const double std = std::sqrt(var / static_cast<double>(img.size()));
    for (float& x : img) {
      x = std < kStdEpsilon ? 0.0f : static_cast<float>((x - mean) / std);
    }
  }
  return images;
}

Tensor standardize_dataset_scale(Tensor images) {
  double var = 0.0;
  for (std::size_t n = 0; n < images.dim(0); ++n) {
    auto img = images.item(n);
    const double mean = mean_of(img);
    for (float& x : img) {
      const double centred = x - mean;
      var += centred * centred;
      x = static_cast<float>(centred);
    }
  }
  const double std = std::sqrt(var / static_cast<double>(images.size()));
  for (float& x : images.data()) {
    x = std < kStdEpsilon ? 0.0f : static_cast<float>(x / std);
  }
  return images;
}

Dataset prepare_dataset(const RawDataset& raw, Standardization mode) {
  raw.validate();
  Tensor grey = greyscale(raw);
  Dataset out;
  out.images = mode == Standardization::kPerImage
                   ? standardize_per_image(std::move(grey))
                   : standardize_dataset_scale(std::move(grey));
  out.labels = raw.labels;
  return out;
}

std::vector<double> class_weights(std::span<const int> labels,
                                  std::size_t class_count) {
  std::vector<std::size_t> counts(class_count, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_count) {
      throw LabelRangeError("label " + std::to_string(labels[i]) +
                            " outside 0.." + std::to_string(class_count - 1));
    }
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  std::vector<double> weights(class_count);
  const double per_class =
      static_cast<double>(labels.size()) / static_cast<double>(class_count);
  for (std::size_t k = 0; k < class_count; ++k) {
    if (counts[k] == 0) {
      throw DataError("class " + std::to_string(k) +
                      " has no examples; inverse-frequency weighting needs "
                      "data covering every class");
    }
    weights[k] = per_class / static_cast<double>(counts[k]);
  }
  return weights;
}

Dataset sample_subset(const Dataset& dataset, std::size_t n,
                      std::uint64_t seed) {
  if (n > dataset.size()) {
    throw ConfigError("subset of " + std::to_string(n) +
                      " requested from a dataset of " +
                      std::to_string(dataset.size()));
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, Stream::kSample);
  // Partial Fisher-Yates with an explicit draw so the subset does not depend
  // on the standard library's shuffle implementation.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t span = order.size() - i;
    const std::size_t j = i + static_cast<std::size_t>(rng() % span);
    std::swap(order[i], order[j]);
  }
  Dataset out;
  const std::size_t item = dataset.images.item_size();
  Shape shape = dataset.images.shape();
  shape[0] = n;
  std::vector<float> data;
  data.reserve(n * item);
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = dataset.images.item(order[i]);
    data.insert(data.end(), src.begin(), src.end());
    out.labels.push_back(dataset.labels[order[i]]);
  }
  out.images = Tensor(std::move(shape), std::move(data));
  return out;
}

double label_entropy(std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  std::vector<std::size_t> counts;
  for (int y : labels) {
    if (y < 0) throw LabelRangeError("negative label");
    if (static_cast<std::size_t>(y) >= counts.size()) counts.resize(y + 1, 0);
    ++counts[static_cast<std::size_t>(y)];
  }
  const double n = static_cast<double>(labels.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

namespace {

// Segment bits a..g: top, upper right, lower right, bottom, lower left,
// upper left, middle.
constexpr std::array<std::uint8_t, 10> kSevenSegment = {
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111};

struct Segment {
  double x0, y0, x1, y1;
};

double distance_to_segment(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = s.x0 + t * dx - px, ey = s.y0 + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

std::vector<Segment> glyph_segments(int digit, double cx, double cy,
                                    double width, double height,
                                    double slant) {
  const double l = cx - width / 2, r = cx + width / 2;
  const double t = cy - height / 2, b = cy + height / 2, m = cy;
  auto sx = [&](double x, double y) { return x + slant * (cy - y); };
  const std::array<Segment, 7> all = {{
      {sx(l, t), t, sx(r, t), t},
      {sx(r, t), t, sx(r, m), m},
      {sx(r, m), m, sx(r, b), b},
      {sx(l, b), b, sx(r, b), b},
      {sx(l, m), m, sx(l, b), b},
      {sx(l, t), t, sx(l, m), m},
      {sx(l, m), m, sx(r, m), m},
  }};
  std::vector<Segment> out;
  for (std::size_t s = 0; s < 7; ++s) {
    if (kSevenSegment[static_cast<std::size_t>(digit)] & (1u << s)) {
      out.push_back(all[s]);
    }
  }
  return out;
}

}  // namespace

RawDataset synthetic_digits(std::size_t n, std::uint64_t seed,
                            std::size_t channels) {
  if (n == 0) throw ConfigError("synthetic dataset needs n >= 1");
  if (channels != 1 && channels != 3) {
    throw ConfigError("synthetic dataset channels must be 1 or 3");
  }
  RawDataset raw;
  raw.count = n;
  raw.channels = channels;
  raw.pixels.resize(n * raw.image_bytes());
  raw.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) raw.labels[i] = static_cast<int>(i % 10);

  Rng rng = make_rng(seed, Stream::kSynthetic);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(raw.labels[i - 1], raw.labels[rng() % i]);
  }

  for (std::size_t i = 0; i < n; ++i) {
    Rng img_rng = make_rng(seed, Stream::kSynthetic, i + 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 8.0);
    auto uniform = [&](double lo, double hi) {
      return lo + (hi - lo) * unit(img_rng);
    };

    const int digit = raw.labels[i];
    const double width = uniform(9.0, 13.0);
    const double height = uniform(17.0, 22.0);
    const double cx = 16.0 + uniform(-2.0, 2.0);
    const double cy = 16.0 + uniform(-2.0, 2.0);
    const double slant = uniform(-0.15, 0.15);
    const double thickness = uniform(2.0, 3.5);
    auto segments = glyph_segments(digit, cx, cy, width, height, slant);
    // Partial neighbouring digits, as in cropped street-number images.
    for (double side : {-1.0, 1.0}) {
      if (unit(img_rng) < 0.5) {
        const int other = static_cast<int>(img_rng() % 10);
        auto extra = glyph_segments(other, cx + side * (width + 6.0), cy,
                                    width, height, slant);
        segments.insert(segments.end(), extra.begin(), extra.end());
      }
    }

    std::array<double, 3> bg{}, fg{};
    double bg_grey = 0.0, fg_grey = 0.0;
    do {
      for (std::size_t c = 0; c < 3; ++c) {
        bg[c] = uniform(0.0, 255.0);
        fg[c] = uniform(0.0, 255.0);
      }
      bg_grey = 0.299 * bg[0] + 0.587 * bg[1] + 0.114 * bg[2];
      fg_grey = 0.299 * fg[0] + 0.587 * fg[1] + 0.114 * fg[2];
    } while (std::abs(fg_grey - bg_grey) < 70.0);
    if (channels == 1) {
      bg = {bg_grey, bg_grey, bg_grey};
      fg = {fg_grey, fg_grey, fg_grey};
    }

    std::uint8_t* img = raw.pixels.data() + i * raw.image_bytes();
    for (std::size_t y = 0; y < 32; ++y) {
      for (std::size_t x = 0; x < 32; ++x) {
        double d = 1e9;
        for (const auto& s : segments) {
          d = std::min(d, distance_to_segment(x + 0.5, y + 0.5, s));
        }
        const double coverage = std::clamp(thickness / 2 + 0.5 - d, 0.0, 1.0);
        for (std::size_t c = 0; c < channels; ++c) {
          const double v =
              bg[c] + coverage * (fg[c] - bg[c]) + noise(img_rng);
          img[c * kPixels + y * 32 + x] =
              static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
        }
      }
    }
  }
  return raw;
}

}  // namespace ftol
