#pragma once

#include "facefit/grids.hpp"
#include "facefit/image.hpp"
#include "facefit/mesh.hpp"
#include "facefit/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace facefit {

// Minimal PNG codec (zlib-backed) covering the formats this project emits:
// 8-bit RGB, 16-bit grayscale and 1-bit grayscale, all non-interlaced with
// deterministic encoding.
struct PngData {
  int width = 0, height = 0;
  int channels = 0;   // 1 or 3
  int bit_depth = 0;  // 1, 8 or 16
  std::vector<std::uint8_t> bytes8;    // bit_depth 8, interleaved
  std::vector<std::uint16_t> words16;  // bit_depth 16
  std::vector<std::uint8_t> bits1;     // bit_depth 1, one byte per pixel (0/1)
};

void write_png_rgb8(const std::string& path, const std::vector<std::uint8_t>& rgb, int width,
                    int height);
void write_png_rgb16(const std::string& path, const std::vector<std::uint16_t>& rgb, int width,
                     int height);
void write_png_gray16(const std::string& path, const std::vector<std::uint16_t>& gray, int width,
                      int height);
void write_png_gray1(const std::string& path, const std::vector<std::uint8_t>& bits, int width,
                     int height);
PngData read_png(const std::string& path);

// Linear-light image as 8-bit sRGB PNG.
void write_image_png(const std::string& path, const Image& image);
Image read_image_png(const std::string& path);

// UV grids are written with v increasing upward (row 0 of the PNG is v = 1).
void write_colorgrid_png(const std::string& path, const ColorGrid& grid);
ColorGrid read_colorgrid_png(const std::string& path);

void write_mask_png(const std::string& path, const MaskGrid& mask);
MaskGrid read_mask_png(const std::string& path);

// 16-bit displacement: value = (d + 0.01) / 0.02 * 65535.
void write_displacement_png(const std::string& path, const DisplacementMap& d);
DisplacementMap read_displacement_png(const std::string& path);

// Shading grids as 16-bit RGB: value = clamp(s / 4, 0, 1) * 65535.
inline constexpr Real kShadingPngScale = 4.0;
void write_shading_png(const std::string& path, const ColorGrid& shading);
ColorGrid read_shading_png(const std::string& path);

}  // namespace facefit
