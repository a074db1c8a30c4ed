#pragma once

#include "facefit/grids.hpp"
#include "facefit/image.hpp"
#include "facefit/mesh.hpp"
#include "facefit/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace facefit {

// Displacement maps: magic "DMAP", u32 n, n*n float32 little-endian.
void write_dmap(const std::string& path, const DisplacementMap& d);
DisplacementMap read_dmap(const std::string& path);

// Float rasters/grids: magic "FIMG", u32 width, height, channels, float32 data
// in row-major interleaved order. Serves as the EXR-like float dump.
void write_float_image(const std::string& path, const Image& image);
Image read_float_image(const std::string& path);
void write_float_grid(const std::string& path, const ColorGrid& grid);
ColorGrid read_float_grid(const std::string& path);
void write_float_scalar_grid(const std::string& path, const ScalarGrid& grid);
ScalarGrid read_float_scalar_grid(const std::string& path);

// Named double arrays in one blob: magic "FFCK", u32 version, u32 count,
// then per entry: u32 name length, name bytes, u64 value count, doubles.
struct BinaryBlobWriter {
  explicit BinaryBlobWriter(const std::string& path);
  ~BinaryBlobWriter();
  void add(const std::string& name, const Real* data, std::size_t count);
  void add(const std::string& name, const VecX& v) { add(name, v.data(), std::size_t(v.size())); }
  void finish();

 private:
  struct Impl;
  Impl* impl_;
};

struct BinaryBlobReader {
  explicit BinaryBlobReader(const std::string& path);
  bool has(const std::string& name) const;
  VecX get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::vector<std::pair<std::string, VecX>> entries_;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace facefit
