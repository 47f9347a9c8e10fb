#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ftol/network.hpp"

namespace ftol {

inline constexpr std::size_t kClassCount = 10;
inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kPaperCnnParams = 180906;

// Conv1 8x8/2 SAME (32), Conv2 6x6/2 VALID (64), Conv3 5x5/1 VALID (64),
// Fc as a 1x1 conv over the flattened 2x2x64 map. ReLU after Conv1-Conv3.
Network build_paper_cnn(std::uint64_t seed, double sigma = 0.05);

// Same layers, all parameters zero.
Network paper_cnn_skeleton();

struct Prediction {
  std::vector<int> labels;
  Tensor probabilities;  // (n, classes)
};

// Argmax ties break to the lowest class index.
Prediction predict(const Network& network, const Tensor& x_batch,
                   int threads = 1);

template <typename T>
int argmax(std::span<const T> row) {
  int best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

// Highest minus second-highest probability.
double margin(std::span<const float> probabilities);
double margin(std::span<const double> probabilities);

// Margin at or above this counts as a fully confident prediction.
inline constexpr double kFullConfidenceMargin = 0.999;

struct ModelMetadata {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
};

void save_model(const std::filesystem::path& path, const Network& network,
                const ModelMetadata& meta = {});

struct LoadedModel {
  Network network;
  ModelMetadata meta;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace ftol
