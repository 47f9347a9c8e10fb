#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "ftol/tensor.hpp"

namespace ftol {

// Binary greyscale PGM (P5, maxval 255). Values are mapped affinely from
// [min, max] of the image to [0, 255]; a constant image becomes mid-grey.
std::string encode_pgm(std::span<const float> pixels, std::size_t height,
                       std::size_t width);
void write_pgm(const std::filesystem::path& path, std::span<const float> pixels,
               std::size_t height, std::size_t width);

// Tiles an (n, 1, h, w) batch into one PGM, `columns` images per row with a
// one-pixel black border. Each tile is normalised on its own.
void write_pgm_grid(const std::filesystem::path& path, const Tensor& images,
                    std::size_t columns);

}  // namespace ftol
