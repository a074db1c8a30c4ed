#include "facefit/io_binary.hpp"

#include "facefit/rng.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace facefit {

namespace {

void write_bytes(std::ofstream& f, const void* data, std::size_t size) {
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void read_bytes(std::ifstream& f, void* data, std::size_t size) {
  f.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (!f) throw std::runtime_error("binary read: truncated file");
}

void write_f32(std::ofstream& f, const Real* data, std::size_t count) {
  std::vector<float> tmp(count);
  for (std::size_t i = 0; i < count; ++i) tmp[i] = static_cast<float>(data[i]);
  write_bytes(f, tmp.data(), count * sizeof(float));
}

std::vector<float> read_f32(std::ifstream& f, std::size_t count) {
  std::vector<float> tmp(count);
  read_bytes(f, tmp.data(), count * sizeof(float));
  return tmp;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[std::size_t(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

void write_dmap(const std::string& path, const DisplacementMap& d) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("dmap: cannot open for writing: " + path);
  f.write("DMAP", 4);
  const std::uint32_t n = static_cast<std::uint32_t>(d.size());
  write_bytes(f, &n, 4);
  write_f32(f, d.grid().data().data(), std::size_t(d.grid().data().size()));
}

DisplacementMap read_dmap(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("dmap: cannot open: " + path);
  char magic[4];
  read_bytes(f, magic, 4);
  if (std::memcmp(magic, "DMAP", 4) != 0) throw std::runtime_error("dmap: bad magic: " + path);
  std::uint32_t n = 0;
  read_bytes(f, &n, 4);
  const auto vals = read_f32(f, std::size_t(n) * n);
  ScalarGrid grid(static_cast<int>(n));
  for (Index i = 0; i < grid.texels(); ++i) grid.data()[i] = vals[std::size_t(i)];
  return DisplacementMap(grid);
}

namespace {

void write_fimg(const std::string& path, const Real* data, int w, int h, int c) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("fimg: cannot open for writing: " + path);
  f.write("FIMG", 4);
  const std::uint32_t dims[3] = {std::uint32_t(w), std::uint32_t(h), std::uint32_t(c)};
  write_bytes(f, dims, 12);
  write_f32(f, data, std::size_t(w) * h * c);
}

std::vector<float> read_fimg(const std::string& path, int& w, int& h, int& c) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("fimg: cannot open: " + path);
  char magic[4];
  read_bytes(f, magic, 4);
  if (std::memcmp(magic, "FIMG", 4) != 0) throw std::runtime_error("fimg: bad magic: " + path);
  std::uint32_t dims[3];
  read_bytes(f, dims, 12);
  w = int(dims[0]);
  h = int(dims[1]);
  c = int(dims[2]);
  return read_f32(f, std::size_t(w) * h * c);
}

}  // namespace

void write_float_image(const std::string& path, const Image& image) {
  // interleave rows: data() is pixel-major already but column-major inside Eigen
  std::vector<Real> inter(std::size_t(image.pixels()) * 3);
  for (Index i = 0; i < image.pixels(); ++i)
    for (int c = 0; c < 3; ++c) inter[std::size_t(i) * 3 + c] = image.data()(i, c);
  write_fimg(path, inter.data(), image.width(), image.height(), 3);
}

Image read_float_image(const std::string& path) {
  int w, h, c;
  const auto vals = read_fimg(path, w, h, c);
  if (c != 3) throw std::runtime_error("fimg: expected 3 channels: " + path);
  Image img(w, h);
  for (Index i = 0; i < img.pixels(); ++i)
    for (int ch = 0; ch < 3; ++ch) img.data()(i, ch) = vals[std::size_t(i) * 3 + ch];
  return img;
}

void write_float_grid(const std::string& path, const ColorGrid& grid) {
  std::vector<Real> inter(std::size_t(grid.texels()) * 3);
  for (Index i = 0; i < grid.texels(); ++i)
    for (int c = 0; c < 3; ++c) inter[std::size_t(i) * 3 + c] = grid.data()(i, c);
  write_fimg(path, inter.data(), grid.size(), grid.size(), 3);
}

ColorGrid read_float_grid(const std::string& path) {
  int w, h, c;
  const auto vals = read_fimg(path, w, h, c);
  if (c != 3 || w != h) throw std::runtime_error("fimg: expected square 3-channel grid: " + path);
  ColorGrid grid(w);
  for (Index i = 0; i < grid.texels(); ++i)
    for (int ch = 0; ch < 3; ++ch) grid.data()(i, ch) = vals[std::size_t(i) * 3 + ch];
  return grid;
}

void write_float_scalar_grid(const std::string& path, const ScalarGrid& grid) {
  write_fimg(path, grid.data().data(), grid.size(), grid.size(), 1);
}

ScalarGrid read_float_scalar_grid(const std::string& path) {
  int w, h, c;
  const auto vals = read_fimg(path, w, h, c);
  if (c != 1 || w != h) throw std::runtime_error("fimg: expected square scalar grid: " + path);
  ScalarGrid grid(w);
  for (Index i = 0; i < grid.texels(); ++i) grid.data()[i] = vals[std::size_t(i)];
  return grid;
}

struct BinaryBlobWriter::Impl {
  std::ofstream f;
  std::uint32_t count = 0;
  bool finished = false;
  std::string path;
};

BinaryBlobWriter::BinaryBlobWriter(const std::string& path) : impl_(new Impl) {
  impl_->path = path;
  impl_->f.open(path, std::ios::binary);
  if (!impl_->f) throw std::runtime_error("blob: cannot open for writing: " + path);
  impl_->f.write("FFCK", 4);
  const std::uint32_t version = 1, count_placeholder = 0;
  write_bytes(impl_->f, &version, 4);
  write_bytes(impl_->f, &count_placeholder, 4);
}

BinaryBlobWriter::~BinaryBlobWriter() {
  if (!impl_->finished) finish();
  delete impl_;
}

void BinaryBlobWriter::add(const std::string& name, const Real* data, std::size_t count) {
  const std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
  write_bytes(impl_->f, &name_len, 4);
  write_bytes(impl_->f, name.data(), name.size());
  const std::uint64_t n = count;
  write_bytes(impl_->f, &n, 8);
  write_bytes(impl_->f, data, count * sizeof(Real));
  ++impl_->count;
}

void BinaryBlobWriter::finish() {
  impl_->finished = true;
  impl_->f.seekp(8);
  write_bytes(impl_->f, &impl_->count, 4);
  impl_->f.close();
}

BinaryBlobReader::BinaryBlobReader(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("blob: cannot open: " + path);
  char magic[4];
  read_bytes(f, magic, 4);
  if (std::memcmp(magic, "FFCK", 4) != 0) throw std::runtime_error("blob: bad magic: " + path);
  std::uint32_t version = 0, count = 0;
  read_bytes(f, &version, 4);
  read_bytes(f, &count, 4);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    read_bytes(f, &name_len, 4);
    std::string name(name_len, '\0');
    read_bytes(f, name.data(), name_len);
    std::uint64_t n = 0;
    read_bytes(f, &n, 8);
    VecX v(static_cast<Index>(n));
    read_bytes(f, v.data(), std::size_t(n) * sizeof(Real));
    entries_.emplace_back(std::move(name), std::move(v));
  }
}

bool BinaryBlobReader::has(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

VecX BinaryBlobReader::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return e.second;
  throw std::runtime_error("blob: missing entry: " + name);
}

std::vector<std::string> BinaryBlobReader::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace facefit
