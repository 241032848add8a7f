#include "subspec/tensor.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

namespace subspec {

std::string Tensor4::shape_str() const {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "(%zu,%zu,%zu,%zu)", n, c, f, t);
  return buf;
}

Conv2dParams::Conv2dParams(std::size_t co, std::size_t ci, std::size_t kf, std::size_t kt,
                           std::size_t pf, std::size_t pt)
    : c_out(co), c_in(ci), k_f(kf), k_t(kt), pad_f(pf), pad_t(pt),
      weight(co * ci * kf * kt, 0.0), bias(co, 0.0) {
  validate();
}

void Conv2dParams::validate() const {
  if (c_out == 0 || c_in == 0)
    throw ShapeMismatch("Conv2dParams: channel counts must be >= 1");
  if (k_f % 2 == 0 || k_t % 2 == 0)
    throw ShapeMismatch("Conv2dParams: kernel sizes must be odd");
  if (weight.size() != c_out * c_in * k_f * k_t)
    throw ShapeMismatch("Conv2dParams: weight size inconsistent with dims");
  if (bias.size() != c_out)
    throw ShapeMismatch("Conv2dParams: bias size inconsistent with c_out");
}

namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', '4'};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32_le(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  if (std::fwrite(b, 1, 4, f) != 4) throw Io("TNS4: short write");
}

std::uint32_t get_u32_le(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) throw Io("TNS4: short read");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_tensor(const std::string& path, const Tensor4& x) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Io("cannot open for writing: " + path);
  if (std::fwrite(kMagic, 1, 4, f.get()) != 4) throw Io("TNS4: short write");
  put_u32_le(f.get(), static_cast<std::uint32_t>(x.n));
  put_u32_le(f.get(), static_cast<std::uint32_t>(x.c));
  put_u32_le(f.get(), static_cast<std::uint32_t>(x.f));
  put_u32_le(f.get(), static_cast<std::uint32_t>(x.t));
  // doubles written raw; this targets little-endian IEEE-754 hosts
  if (std::fwrite(x.data.data(), sizeof(double), x.data.size(), f.get()) != x.data.size())
    throw Io("TNS4: short write: " + path);
}

Tensor4 load_tensor(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw MissingBlob("cannot open tensor blob: " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw Io("TNS4: bad magic in " + path);
  const std::size_t n = get_u32_le(f.get());
  const std::size_t c = get_u32_le(f.get());
  const std::size_t ff = get_u32_le(f.get());
  const std::size_t t = get_u32_le(f.get());
  if (n == 0 || c == 0 || ff == 0 || t == 0) throw Io("TNS4: zero dimension in " + path);
  Tensor4 x(n, c, ff, t);
  if (std::fread(x.data.data(), sizeof(double), x.data.size(), f.get()) != x.data.size())
    throw Io("TNS4: truncated payload in " + path);
  return x;
}

void save_mat(const std::string& path, const Mat& m) {
  Tensor4 x(1, 1, m.rows, m.cols);
  x.data = m.v;
  save_tensor(path, x);
}

Mat load_mat(const std::string& path) {
  const Tensor4 x = load_tensor(path);
  if (x.n != 1 || x.c != 1) throw Io("TNS4: expected (1,1,r,c) blob in " + path);
  Mat m(x.f, x.t);
  m.v = x.data;
  return m;
}

}  // namespace subspec
