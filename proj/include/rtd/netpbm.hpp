#pragma once

// Binary netpbm I/O (P5 grayscale, P6 RGB; maxval 255 or 65535) and the
// normalized image types used by the steganography pipeline.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rtd/error.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

/// Raw integer samples, interleaved by channel, rows top to bottom.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  unsigned maxval = 255;
  std::vector<std::uint16_t> samples;

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Samples normalized to [0, 1], interleaved by channel.
template <std::size_t Channels>
struct BasicImage {
  static_assert(Channels == 1 || Channels == 3);
  static constexpr std::size_t channels = Channels;

  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> samples;

  BasicImage() = default;
  BasicImage(std::size_t w, std::size_t h) : width(w), height(h), samples(w * h * Channels, 0.0) {
    require(w >= 1 && h >= 1, ErrorKind::DimMismatch, "image dimensions must be >= 1");
  }

  std::size_t pixel_count() const noexcept { return width * height; }

  /// Channel c as an h×w matrix.
  Matrix channel(std::size_t c) const {
    Matrix m(height, width);
    for (std::size_t p = 0; p < pixel_count(); ++p) m.data()[p] = samples[p * Channels + c];
    return m;
  }

  void set_channel(std::size_t c, const Matrix& m) {
    require(static_cast<std::size_t>(m.rows()) == height && static_cast<std::size_t>(m.cols()) == width,
            ErrorKind::DimMismatch, "channel shape differs from image");
    for (std::size_t p = 0; p < pixel_count(); ++p) samples[p * Channels + c] = m.data()[p];
  }

  friend bool operator==(const BasicImage&, const BasicImage&) = default;
};

using GrayImage = BasicImage<1>;
using RgbImage = BasicImage<3>;
using AnyImage = std::variant<GrayImage, RgbImage>;

namespace detail {

inline void skip_space_and_comments(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
      in.get();
    } else {
      return;
    }
  }
}

inline std::size_t read_header_number(std::istream& in, const char* field) {
  skip_space_and_comments(in);
  std::size_t value = 0;
  bool any = false;
  while (std::isdigit(in.peek())) {
    value = value * 10 + static_cast<std::size_t>(in.get() - '0');
    any = true;
    require(value < (std::size_t{1} << 40), ErrorKind::MalformedHeader, std::string("absurd ") + field);
  }
  require(any, ErrorKind::MalformedHeader, std::string("expected ") + field);
  return value;
}

}  // namespace detail

inline Raster read_netpbm(std::istream& in) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  require(in.good() && magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6'), ErrorKind::MalformedHeader,
          "expected binary PGM (P5) or PPM (P6)");
  Raster r;
  r.channels = magic[1] == '5' ? 1 : 3;
  r.width = detail::read_header_number(in, "width");
  r.height = detail::read_header_number(in, "height");
  const std::size_t maxval = detail::read_header_number(in, "maxval");
  require(r.width >= 1 && r.height >= 1, ErrorKind::MalformedHeader, "zero image dimension");
  require(maxval == 255 || maxval == 65535, ErrorKind::UnsupportedMaxval,
          "maxval " + std::to_string(maxval) + " (supported: 255, 65535)");
  r.maxval = static_cast<unsigned>(maxval);
  const int sep = in.get();
  require(sep == ' ' || sep == '\n' || sep == '\r' || sep == '\t', ErrorKind::MalformedHeader,
          "missing whitespace before raster");

  const std::size_t count = r.width * r.height * r.channels;
  const std::size_t bytes_per = r.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(count * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(static_cast<std::size_t>(in.gcount()) == raw.size(), ErrorKind::MalformedHeader, "truncated raster");
  r.samples.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    // 16-bit samples are big-endian.
    const unsigned v = bytes_per == 2 ? (unsigned{raw[2 * k]} << 8) | raw[2 * k + 1] : raw[k];
    require(v <= r.maxval, ErrorKind::MalformedHeader, "sample exceeds maxval");
    r.samples[k] = static_cast<std::uint16_t>(v);
  }
  return r;
}

inline void write_netpbm(std::ostream& out, const Raster& r) {
  require(r.channels == 1 || r.channels == 3, ErrorKind::InvalidArgument, "netpbm supports 1 or 3 channels");
  require(r.maxval == 255 || r.maxval == 65535, ErrorKind::UnsupportedMaxval, "maxval must be 255 or 65535");
  require(r.samples.size() == r.width * r.height * r.channels, ErrorKind::DimMismatch, "sample count mismatch");
  out << (r.channels == 1 ? "P5" : "P6") << '\n' << r.width << ' ' << r.height << '\n' << r.maxval << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(r.samples.size() * 2);
  for (auto v : r.samples) {
    if (r.maxval > 255) raw.push_back(static_cast<unsigned char>(v >> 8));
    raw.push_back(static_cast<unsigned char>(v & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

inline Raster read_netpbm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.is_open(), ErrorKind::Io, "cannot open " + path);
  return read_netpbm(in);
}

inline void write_netpbm(const std::string& path, const Raster& r) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.is_open(), ErrorKind::Io, "cannot write " + path);
  write_netpbm(out, r);
  require(out.good(), ErrorKind::Io, "write failed for " + path);
}

/// round(clamp(x, 0, 1)·maxval)
inline std::uint16_t quantize_sample(double x, unsigned maxval) {
  const double clamped = std::clamp(x, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(clamped * maxval));
}

template <std::size_t C>
Raster to_raster(const BasicImage<C>& img, unsigned maxval = 255) {
  Raster r{img.width, img.height, C, maxval, {}};
  r.samples.reserve(img.samples.size());
  for (double x : img.samples) r.samples.push_back(quantize_sample(x, maxval));
  return r;
}

template <std::size_t C>
BasicImage<C> from_raster(const Raster& r) {
  require(r.channels == C, ErrorKind::DimMismatch,
          "expected " + std::to_string(C) + " channel(s), file has " + std::to_string(r.channels));
  BasicImage<C> img(r.width, r.height);
  for (std::size_t k = 0; k < r.samples.size(); ++k)
    img.samples[k] = static_cast<double>(r.samples[k]) / static_cast<double>(r.maxval);
  return img;
}

inline AnyImage read_image(const std::string& path) {
  const Raster r = read_netpbm(path);
  if (r.channels == 1) return from_raster<1>(r);
  return from_raster<3>(r);
}

inline GrayImage read_gray_image(const std::string& path) { return from_raster<1>(read_netpbm(path)); }
inline RgbImage read_rgb_image(const std::string& path) { return from_raster<3>(read_netpbm(path)); }

template <std::size_t C>
void write_image(const BasicImage<C>& img, const std::string& path, unsigned maxval = 255) {
  write_netpbm(path, to_raster(img, maxval));
}

}  // namespace rtd
