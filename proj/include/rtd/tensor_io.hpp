#pragma once

// On-disk formats used by the command-line tool.
//
// Tensor file:
//   rtd-tensor v1\n
//   shape K I1 ... IK\n
//   dtype f64\n
//   <∏Ik little-endian IEEE-754 doubles in row-major order>
//
// Ops file (one reshuffle per line, target shape = the observation's shape):
//   rtd-ops v1
//   identity <m> <n>
//   seeded <m> <n> <seed>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rtd/error.hpp"
#include "rtd/reshuffle.hpp"
#include "rtd/tensor.hpp"

namespace rtd {

inline void write_tensor(std::ostream& out, const DenseTensor& t) {
  out << "rtd-tensor v1\nshape " << t.order();
  for (auto extent : t.shape()) out << ' ' << extent;
  out << "\ndtype f64\n";
  std::vector<unsigned char> raw(t.size() * 8);
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto bits = std::bit_cast<std::uint64_t>(t[k]);
    for (int b = 0; b < 8; ++b) raw[8 * k + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

inline DenseTensor read_tensor(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "rtd-tensor v1", ErrorKind::MalformedHeader,
          "expected 'rtd-tensor v1'");
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::MalformedHeader, "missing shape line");
  std::istringstream shape_line(line);
  std::string keyword;
  std::size_t order = 0;
  require(static_cast<bool>(shape_line >> keyword >> order) && keyword == "shape" && order >= 1,
          ErrorKind::MalformedHeader, "bad shape line: " + line);
  Shape shape(order);
  for (auto& extent : shape)
    require(static_cast<bool>(shape_line >> extent) && extent >= 1, ErrorKind::MalformedHeader, "bad extent");
  require(!(shape_line >> keyword), ErrorKind::MalformedHeader, "trailing tokens on shape line");
  require(static_cast<bool>(std::getline(in, line)) && line == "dtype f64", ErrorKind::MalformedHeader,
          "expected 'dtype f64'");

  const std::size_t count = element_count(shape);
  std::vector<unsigned char> raw(count * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(static_cast<std::size_t>(in.gcount()) == raw.size(), ErrorKind::MalformedHeader, "truncated payload");
  std::vector<double> data(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{raw[8 * k + static_cast<std::size_t>(b)]} << (8 * b);
    data[k] = std::bit_cast<double>(bits);
  }
  return DenseTensor(std::move(shape), std::move(data));
}

inline void write_tensor(const std::string& path, const DenseTensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.is_open(), ErrorKind::Io, "cannot write " + path);
  write_tensor(out, t);
  require(out.good(), ErrorKind::Io, "write failed for " + path);
}

inline DenseTensor read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.is_open(), ErrorKind::Io, "cannot open " + path);
  return read_tensor(in);
}

inline DenseTensor matrix_as_tensor(const Matrix& m) {
  return DenseTensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                     std::vector<double>(m.data(), m.data() + m.size()));
}

inline Matrix tensor_as_matrix(const DenseTensor& t) {
  require(t.order() == 2, ErrorKind::ShapeMismatch, "expected an order-2 tensor");
  Matrix m(t.shape()[0], t.shape()[1]);
  std::memcpy(m.data(), t.data(), t.size() * sizeof(double));
  return m;
}

struct OpSpec {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool identity = true;
  std::uint64_t seed = 0;

  ReshuffleOp build(const Shape& dst_shape) const {
    return identity ? reshuffle_identity(rows, cols, dst_shape) : reshuffle_from_seed(rows, cols, dst_shape, seed);
  }
  friend bool operator==(const OpSpec&, const OpSpec&) = default;
};

inline void write_op_specs(std::ostream& out, const std::vector<OpSpec>& specs) {
  out << "rtd-ops v1\n";
  for (const auto& s : specs) {
    if (s.identity)
      out << "identity " << s.rows << ' ' << s.cols << '\n';
    else
      out << "seeded " << s.rows << ' ' << s.cols << ' ' << s.seed << '\n';
  }
}

inline std::vector<OpSpec> read_op_specs(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "rtd-ops v1", ErrorKind::MalformedHeader,
          "expected 'rtd-ops v1'");
  std::vector<OpSpec> specs;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    OpSpec s;
    require(static_cast<bool>(ls >> kind >> s.rows >> s.cols), ErrorKind::MalformedHeader, "bad op line: " + line);
    if (kind == "identity") {
      s.identity = true;
    } else if (kind == "seeded") {
      s.identity = false;
      require(static_cast<bool>(ls >> s.seed), ErrorKind::MalformedHeader, "seeded op needs a seed: " + line);
    } else {
      throw Error(ErrorKind::MalformedHeader, "unknown op kind: " + kind);
    }
    require(!(ls >> kind), ErrorKind::MalformedHeader, "trailing tokens: " + line);
    specs.push_back(s);
  }
  require(!specs.empty(), ErrorKind::MalformedHeader, "ops file lists no operators");
  return specs;
}

inline void write_op_specs(const std::string& path, const std::vector<OpSpec>& specs) {
  std::ofstream out(path, std::ios::trunc);
  require(out.is_open(), ErrorKind::Io, "cannot write " + path);
  write_op_specs(out, specs);
}

inline std::vector<OpSpec> read_op_specs(const std::string& path) {
  std::ifstream in(path);
  require(in.is_open(), ErrorKind::Io, "cannot open " + path);
  return read_op_specs(in);
}

}  // namespace rtd
