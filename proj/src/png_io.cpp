#include "facefit/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace facefit {

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
  put_u32_be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

void write_png(const std::string& path, int width, int height, int bit_depth, int color_type,
               const std::vector<std::uint8_t>& raster_rows) {
  std::vector<std::uint8_t> png;
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  png.insert(png.end(), sig, sig + 8);

  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(static_cast<std::uint8_t>(bit_depth));
  ihdr.push_back(static_cast<std::uint8_t>(color_type));
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(png, "IHDR", ihdr);

  uLongf comp_size = compressBound(static_cast<uLong>(raster_rows.size()));
  std::vector<std::uint8_t> comp(comp_size);
  if (compress2(comp.data(), &comp_size, raster_rows.data(),
                static_cast<uLong>(raster_rows.size()), 6) != Z_OK)
    throw std::runtime_error("png: deflate failed");
  comp.resize(comp_size);
  append_chunk(png, "IDAT", comp);
  append_chunk(png, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("png: cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
  if (!f) throw std::runtime_error("png: write failed: " + path);
}

std::size_t row_bytes(int width, int channels, int bit_depth) {
  return (std::size_t(width) * channels * bit_depth + 7) / 8;
}

void unfilter(std::vector<std::uint8_t>& raw, int width, int height, int channels,
              int bit_depth) {
  const std::size_t stride = row_bytes(width, channels, bit_depth);
  const std::size_t bpp = std::max<std::size_t>(1, std::size_t(channels) * bit_depth / 8);
  std::vector<std::uint8_t> out(std::size_t(height) * stride);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[std::size_t(y) * (stride + 1)];
    const std::uint8_t* src = raw.data() + std::size_t(y) * (stride + 1) + 1;
    std::uint8_t* dst = out.data() + std::size_t(y) * stride;
    const std::uint8_t* prev = y > 0 ? out.data() + std::size_t(y - 1) * stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int left = i >= bpp ? dst[i - bpp] : 0;
      const int up = prev ? prev[i] : 0;
      const int ul = (prev && i >= bpp) ? prev[i - bpp] : 0;
      int x = src[i];
      switch (filter) {
        case 0: break;
        case 1: x += left; break;
        case 2: x += up; break;
        case 3: x += (left + up) / 2; break;
        case 4: {
          const int p = left + up - ul;
          const int pa = std::abs(p - left), pb = std::abs(p - up), pc = std::abs(p - ul);
          x += (pa <= pb && pa <= pc) ? left : (pb <= pc ? up : ul);
          break;
        }
        default: throw std::runtime_error("png: unknown filter type");
      }
      dst[i] = static_cast<std::uint8_t>(x);
    }
  }
  raw = std::move(out);
}

}  // namespace

void write_png_rgb8(const std::string& path, const std::vector<std::uint8_t>& rgb, int width,
                    int height) {
  const std::size_t stride = row_bytes(width, 3, 8);
  std::vector<std::uint8_t> rows;
  rows.reserve(std::size_t(height) * (stride + 1));
  for (int y = 0; y < height; ++y) {
    rows.push_back(0);  // filter: none
    rows.insert(rows.end(), rgb.begin() + std::size_t(y) * stride,
                rgb.begin() + std::size_t(y + 1) * stride);
  }
  write_png(path, width, height, 8, 2, rows);
}

void write_png_gray16(const std::string& path, const std::vector<std::uint16_t>& gray, int width,
                      int height) {
  std::vector<std::uint8_t> rows;
  rows.reserve(std::size_t(height) * (std::size_t(width) * 2 + 1));
  for (int y = 0; y < height; ++y) {
    rows.push_back(0);
    for (int x = 0; x < width; ++x) {
      const std::uint16_t v = gray[std::size_t(y) * width + x];
      rows.push_back(static_cast<std::uint8_t>(v >> 8));
      rows.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
  }
  write_png(path, width, height, 16, 0, rows);
}

void write_png_rgb16(const std::string& path, const std::vector<std::uint16_t>& rgb, int width,
                     int height) {
  std::vector<std::uint8_t> rows;
  rows.reserve(std::size_t(height) * (std::size_t(width) * 6 + 1));
  for (int y = 0; y < height; ++y) {
    rows.push_back(0);
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) {
        const std::uint16_t v = rgb[(std::size_t(y) * width + x) * 3 + c];
        rows.push_back(static_cast<std::uint8_t>(v >> 8));
        rows.push_back(static_cast<std::uint8_t>(v & 0xff));
      }
  }
  write_png(path, width, height, 16, 2, rows);
}

void write_png_gray1(const std::string& path, const std::vector<std::uint8_t>& bits, int width,
                     int height) {
  const std::size_t stride = row_bytes(width, 1, 1);
  std::vector<std::uint8_t> rows;
  rows.reserve(std::size_t(height) * (stride + 1));
  for (int y = 0; y < height; ++y) {
    rows.push_back(0);
    std::vector<std::uint8_t> packed(stride, 0);
    for (int x = 0; x < width; ++x)
      if (bits[std::size_t(y) * width + x])
        packed[std::size_t(x) / 8] |= static_cast<std::uint8_t>(0x80 >> (x % 8));
    rows.insert(rows.end(), packed.begin(), packed.end());
  }
  write_png(path, width, height, 1, 0, rows);
}

PngData read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("png: cannot open: " + path);
  std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0)
    throw std::runtime_error("png: bad signature: " + path);

  PngData out;
  int color_type = -1;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  while (pos + 8 <= file.size()) {
    const std::uint32_t len = get_u32_be(file.data() + pos);
    const char* type = reinterpret_cast<const char*>(file.data() + pos + 4);
    const std::uint8_t* data = file.data() + pos + 8;
    if (pos + 12 + len > file.size()) throw std::runtime_error("png: truncated chunk");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      out.width = static_cast<int>(get_u32_be(data));
      out.height = static_cast<int>(get_u32_be(data + 4));
      out.bit_depth = data[8];
      color_type = data[9];
      if (data[12] != 0) throw std::runtime_error("png: interlaced images unsupported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (color_type == 2)
    out.channels = 3;
  else if (color_type == 0)
    out.channels = 1;
  else
    throw std::runtime_error("png: unsupported color type");

  const std::size_t stride = row_bytes(out.width, out.channels, out.bit_depth);
  uLongf raw_size = static_cast<uLongf>(std::size_t(out.height) * (stride + 1));
  std::vector<std::uint8_t> raw(raw_size);
  if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_size != raw.size())
    throw std::runtime_error("png: inflate failed: " + path);
  unfilter(raw, out.width, out.height, out.channels, out.bit_depth);

  const std::size_t n = std::size_t(out.width) * out.height;
  if (out.bit_depth == 8) {
    out.bytes8.assign(raw.begin(), raw.end());
  } else if (out.bit_depth == 16) {
    out.words16.resize(n * out.channels);
    for (std::size_t i = 0; i < out.words16.size(); ++i)
      out.words16[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  } else if (out.bit_depth == 1) {
    out.bits1.resize(n);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        out.bits1[std::size_t(y) * out.width + x] =
            (raw[std::size_t(y) * stride + std::size_t(x) / 8] >> (7 - x % 8)) & 1;
  } else {
    throw std::runtime_error("png: unsupported bit depth");
  }
  return out;
}

void write_image_png(const std::string& path, const Image& image) {
  write_png_rgb8(path, to_srgb8(image), image.width(), image.height());
}

Image read_image_png(const std::string& path) {
  const PngData png = read_png(path);
  if (png.channels != 3 || png.bit_depth != 8)
    throw std::runtime_error("png: expected 8-bit RGB: " + path);
  return from_srgb8(png.bytes8.data(), png.width, png.height);
}

void write_colorgrid_png(const std::string& path, const ColorGrid& grid) {
  const int n = grid.size();
  std::vector<std::uint8_t> rgb(std::size_t(n) * n * 3);
  for (int row = 0; row < n; ++row) {
    const int y = n - 1 - row;  // v points up
    for (int x = 0; x < n; ++x) {
      const Vec3 c = grid.at(x, y);
      for (int ch = 0; ch < 3; ++ch)
        rgb[(std::size_t(row) * n + x) * 3 + ch] =
            static_cast<std::uint8_t>(std::lround(srgb_encode(c[ch]) * 255.0));
    }
  }
  write_png_rgb8(path, rgb, n, n);
}

ColorGrid read_colorgrid_png(const std::string& path) {
  const PngData png = read_png(path);
  if (png.channels != 3 || png.bit_depth != 8 || png.width != png.height)
    throw std::runtime_error("png: expected square 8-bit RGB grid: " + path);
  ColorGrid grid(png.width);
  const int n = png.width;
  for (int row = 0; row < n; ++row) {
    const int y = n - 1 - row;
    for (int x = 0; x < n; ++x) {
      Vec3 c;
      for (int ch = 0; ch < 3; ++ch)
        c[ch] = srgb_decode(png.bytes8[(std::size_t(row) * n + x) * 3 + ch] / 255.0);
      grid.set(x, y, c);
    }
  }
  return grid;
}

void write_mask_png(const std::string& path, const MaskGrid& mask) {
  const int n = mask.size();
  std::vector<std::uint8_t> bits(std::size_t(n) * n);
  for (int row = 0; row < n; ++row)
    for (int x = 0; x < n; ++x) bits[std::size_t(row) * n + x] = mask.at(x, n - 1 - row) ? 1 : 0;
  write_png_gray1(path, bits, n, n);
}

MaskGrid read_mask_png(const std::string& path) {
  const PngData png = read_png(path);
  if (png.channels != 1 || png.bit_depth != 1 || png.width != png.height)
    throw std::runtime_error("png: expected square 1-bit mask: " + path);
  MaskGrid mask(png.width);
  const int n = png.width;
  for (int row = 0; row < n; ++row)
    for (int x = 0; x < n; ++x)
      mask.set(x, n - 1 - row, png.bits1[std::size_t(row) * n + x] != 0);
  return mask;
}

void write_shading_png(const std::string& path, const ColorGrid& shading) {
  const int n = shading.size();
  std::vector<std::uint16_t> rgb(std::size_t(n) * n * 3);
  for (int row = 0; row < n; ++row)
    for (int x = 0; x < n; ++x) {
      const Vec3 s = shading.at(x, n - 1 - row);
      for (int c = 0; c < 3; ++c) {
        const Real mapped = std::min(std::max(s[c] / kShadingPngScale, 0.0), 1.0);
        rgb[(std::size_t(row) * n + x) * 3 + c] =
            static_cast<std::uint16_t>(std::lround(mapped * 65535.0));
      }
    }
  write_png_rgb16(path, rgb, n, n);
}

ColorGrid read_shading_png(const std::string& path) {
  const PngData png = read_png(path);
  if (png.channels != 3 || png.bit_depth != 16 || png.width != png.height)
    throw std::runtime_error("png: expected square 16-bit RGB shading grid: " + path);
  const int n = png.width;
  ColorGrid grid(n);
  for (int row = 0; row < n; ++row)
    for (int x = 0; x < n; ++x) {
      Vec3 s;
      for (int c = 0; c < 3; ++c)
        s[c] = png.words16[(std::size_t(row) * n + x) * 3 + c] / 65535.0 * kShadingPngScale;
      grid.set(x, n - 1 - row, s);
    }
  return grid;
}

void write_displacement_png(const std::string& path, const DisplacementMap& d) {
  const int n = d.size();
  std::vector<std::uint16_t> gray(std::size_t(n) * n);
  for (int row = 0; row < n; ++row)
    for (int x = 0; x < n; ++x) {
      const Real v = d.grid().at(x, n - 1 - row);
      const Real mapped = (v + kDisplacementLimit) / (2.0 * kDisplacementLimit);
      gray[std::size_t(row) * n + x] =
          static_cast<std::uint16_t>(std::lround(std::min(std::max(mapped, 0.0), 1.0) * 65535.0));
    }
  write_png_gray16(path, gray, n, n);
}

DisplacementMap read_displacement_png(const std::string& path) {
  const PngData png = read_png(path);
  if (png.channels != 1 || png.bit_depth != 16 || png.width != png.height)
    throw std::runtime_error("png: expected square 16-bit displacement: " + path);
  const int n = png.width;
  ScalarGrid grid(n);
  for (int row = 0; row < n; ++row)
    for (int x = 0; x < n; ++x)
      grid.at(x, n - 1 - row) =
          png.words16[std::size_t(row) * n + x] / 65535.0 * (2.0 * kDisplacementLimit) -
          kDisplacementLimit;
  return DisplacementMap(grid);
}

}  // namespace facefit
