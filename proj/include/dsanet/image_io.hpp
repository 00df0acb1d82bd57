#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dsanet/tensor.hpp"

namespace dsanet::io {

// Binary PGM (P5). Images are (H, W) tensors in [0, 1]; bit depth 8 or 16.
// A value v is stored as round(v * maxval), so images whose values are
// multiples of 1/maxval round-trip exactly.
void write_pgm(const std::filesystem::path& path, const Image& image, int bit_depth);
Image read_pgm(const std::filesystem::path& path);

// Quantize to the 16-bit grid used on disk.
double quantize16(double v);

// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t gray = 255) : width(w), height(h), pixels(std::size_t(w) * h * 3, gray) {}
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

// PNG without time or text chunks, so identical pixels give identical bytes.
void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace dsanet::io
