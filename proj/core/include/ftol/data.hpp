#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ftol/tensor.hpp"

namespace ftol {

// 8-bit images (n, c, 32, 32) with c in {1, 3}, labels in 0..9.
struct RawDataset {
  std::size_t count = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;

  std::size_t image_bytes() const { return channels * 32 * 32; }
  void validate() const;
};

// Standardized real images (n, 1, 32, 32).
struct Dataset {
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

// `.ftc` container, little-endian: "FTC1", u8 channels, u32 n,
// n*c*32*32 pixel bytes (image-major, channel-major, row-major), n labels.
RawDataset load_container(const std::filesystem::path& path);
void save_container(const RawDataset& raw, const std::filesystem::path& path);

// grey = 0.299 R + 0.587 G + 0.114 B, kept in real arithmetic.
Tensor ntsc_greyscale(const RawDataset& rgb);

// Single-channel images as reals, or NTSC greyscale for RGB.
Tensor greyscale(const RawDataset& raw);

inline constexpr double kStdEpsilon = 1e-8;

// Each image to zero mean and unit population std; constant images map to
// all zeros.
Tensor standardize_per_image(Tensor images);

// Per-image mean subtraction followed by division with one std pooled over
// the whole batch.
Tensor standardize_dataset_scale(Tensor images);

enum class Standardization { kPerImage, kPerDataset };

Dataset prepare_dataset(const RawDataset& raw,
                        Standardization mode = Standardization::kPerImage);

// w[k] = (n / classes) / count[k]; every class must be present.
std::vector<double> class_weights(std::span<const int> labels,
                                  std::size_t class_count = 10);

inline constexpr std::size_t kDefaultSubsetSize = 1000;

// n distinct images chosen by a seeded shuffle.
Dataset sample_subset(const Dataset& dataset,
                      std::size_t n = kDefaultSubsetSize,
                      std::uint64_t seed = 0);

// Plug-in Shannon entropy of the label histogram, in bits.
double label_entropy(std::span<const int> labels);

// Seven-segment digits with random placement, stroke width, colours, clutter
// and pixel noise. Label i is i % 10 before a seeded shuffle, so every class
// is present once n >= 10.
RawDataset synthetic_digits(std::size_t n, std::uint64_t seed,
                            std::size_t channels = 3);

}  // namespace ftol
