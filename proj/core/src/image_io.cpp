#include "ftol/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

namespace ftol {

namespace {

std::vector<unsigned char> to_bytes(std::span<const float> pixels) {
  std::vector<unsigned char> out(pixels.size(), 128);
  if (pixels.empty()) return out;
  const auto [lo, hi] = std::minmax_element(pixels.begin(), pixels.end());
  if (!(*hi > *lo)) return out;
  const double scale = 255.0 / (static_cast<double>(*hi) - *lo);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    out[i] = static_cast<unsigned char>(
        std::clamp(std::lround((pixels[i] - *lo) * scale), 0L, 255L));
  }
  return out;
}

std::string header(std::size_t height, std::size_t width) {
  return "P5\n" + std::to_string(width) + " " + std::to_string(height) +
         "\n255\n";
}

void write_bytes(const std::filesystem::path& path, const std::string& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string encode_pgm(std::span<const float> pixels, std::size_t height,
                       std::size_t width) {
  if (pixels.size() != height * width) {
    throw ShapeError("PGM: pixel count does not match " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  const auto bytes = to_bytes(pixels);
  return header(height, width) + std::string(bytes.begin(), bytes.end());
}

void write_pgm(const std::filesystem::path& path, std::span<const float> pixels,
               std::size_t height, std::size_t width) {
  write_bytes(path, encode_pgm(pixels, height, width));
}

void write_pgm_grid(const std::filesystem::path& path, const Tensor& images,
                    std::size_t columns) {
  if (images.rank() != 4 || images.dim(1) != 1) {
    throw ShapeError("PGM grid expects (n, 1, h, w), got " +
                     shape_string(images.shape()));
  }
  if (columns == 0) throw ConfigError("PGM grid needs at least one column");
  const std::size_t n = images.dim(0), h = images.dim(2), w = images.dim(3);
  const std::size_t rows = (n + columns - 1) / columns;
  const std::size_t out_w = columns * (w + 1) + 1;
  const std::size_t out_h = rows * (h + 1) + 1;
  std::string canvas(out_w * out_h, '\0');
  for (std::size_t i = 0; i < n; ++i) {
    const auto tile = to_bytes(images.item(i));
    const std::size_t oy = (i / columns) * (h + 1) + 1;
    const std::size_t ox = (i % columns) * (w + 1) + 1;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        canvas[(oy + y) * out_w + ox + x] =
            static_cast<char>(tile[y * w + x]);
      }
    }
  }
  write_bytes(path, header(out_h, out_w) + canvas);
}

}  // namespace ftol
