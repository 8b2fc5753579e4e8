#pragma once

// Image steganography on top of the reshuffled decomposition.
//
// A secret RGB image is hidden in a grayscale cover by adding each channel,
// centred at mid-gray, reshuffled by a key-derived permutation and scaled by
// the strength s:
//
//   container = cover + s · Σ_c R_c(channel_c − 0.5)
//
// The all-ones image is invariant under every reshuffle, so its weight cannot
// be attributed to one component; centring keeps that ambiguity out of the
// payload. Reveal decomposes the container into four components (the cover
// under the identity reshuffle plus the three keyed channels).

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "rtd/analysis.hpp"
#include "rtd/error.hpp"
#include "rtd/linalg.hpp"
#include "rtd/netpbm.hpp"
#include "rtd/reshuffle.hpp"
#include "rtd/rng.hpp"
#include "rtd/solver.hpp"

namespace rtd {

inline constexpr double kPayloadOffset = 0.5;
inline constexpr double kDefaultStrength = 0.05;
inline constexpr int kStegoKeyVersion = 1;

enum class ContainerMode { Float, Quantized8 };

struct StegoKey {
  std::uint64_t master_seed = 0;
  std::size_t cover_h = 0, cover_w = 0;
  std::size_t secret_h = 0, secret_w = 0;
  double strength = kDefaultStrength;
  ContainerMode mode = ContainerMode::Float;
  int format_version = kStegoKeyVersion;
  static constexpr std::size_t component_count = 4;  // cover + R, G, B

  friend bool operator==(const StegoKey&, const StegoKey&) = default;
};

struct Container {
  GrayImage image;
  ContainerMode mode = ContainerMode::Float;
};

struct ConcealResult {
  Container container;
  StegoKey key;
};

inline std::uint64_t channel_seed(std::uint64_t master_seed, std::size_t channel) {
  return splitmix64_at(master_seed, channel);
}

inline std::vector<ReshuffleOp> stego_ops(const StegoKey& key) {
  const Shape cover_shape{key.cover_h, key.cover_w};
  std::vector<ReshuffleOp> ops;
  ops.push_back(reshuffle_identity(key.cover_h, key.cover_w, cover_shape));
  for (std::size_t c = 0; c < 3; ++c)
    ops.push_back(reshuffle_from_seed(key.secret_h, key.secret_w, cover_shape, channel_seed(key.master_seed, c)));
  return ops;
}

inline double quantize8(double x) { return static_cast<double>(quantize_sample(x, 255)) / 255.0; }

inline ConcealResult conceal(const GrayImage& cover, const RgbImage& secret, double strength,
                             std::uint64_t master_seed, ContainerMode mode = ContainerMode::Float) {
  require(cover.pixel_count() == secret.pixel_count(), ErrorKind::DimMismatch,
          "cover has " + std::to_string(cover.pixel_count()) + " pixels, secret channels have " +
              std::to_string(secret.pixel_count()));
  require(strength > 0.0 && std::isfinite(strength), ErrorKind::StrengthOutOfRange, "strength must be > 0");

  StegoKey key{master_seed, cover.height, cover.width, secret.height, secret.width, strength, mode, kStegoKeyVersion};
  const auto ops = stego_ops(key);

  std::vector<double> values = cover.samples;
  for (std::size_t c = 0; c < 3; ++c) {
    const Matrix payload = secret.channel(c).array() - kPayloadOffset;
    detail::accumulate(ops[c + 1], payload, strength, values);
  }
  if (mode == ContainerMode::Quantized8)
    for (double& v : values) v = quantize8(v);

  Container container{GrayImage(cover.width, cover.height), mode};
  container.image.samples = std::move(values);
  return {std::move(container), key};
}

inline SolverConfig reveal_solver_config(const Container& container) {
  SolverConfig config;
  const double norm = spectral_norm(container.image.channel(0));
  config.kappa0 = norm > 0.0 ? 1.0 / norm : 1.0;
  return config;
}

struct RevealReferences {
  std::optional<RgbImage> secret;
  std::optional<GrayImage> cover;
};

struct RevealMetrics {
  std::optional<double> cover_sir_db;        // recovered cover vs reference
  std::optional<double> container_sir_db;    // container vs reference cover
  std::array<double, 3> payload_sir_db{};    // per channel, on channel − 0.5
  double payload_tsir_db = 0.0;              // the three channels together
  std::array<double, 3> image_sir_db{};      // per channel, on the clamped image
  double image_tsir_db = 0.0;
};

struct RevealResult {
  RgbImage secret;
  GrayImage cover;
  std::vector<Matrix> payload;  // Â_c / s for c = R, G, B (centred channels)
  std::size_t iterations = 0;
  bool converged = false;
  double residual = 0.0;
  std::optional<RevealMetrics> metrics;
};

inline void check_key(const Container& container, const StegoKey& key) {
  require(key.format_version == kStegoKeyVersion, ErrorKind::KeyMismatch,
          "unsupported key version " + std::to_string(key.format_version));
  require(container.image.height == key.cover_h && container.image.width == key.cover_w, ErrorKind::KeyMismatch,
          "container dimensions differ from the key's cover dimensions");
  require(key.secret_h * key.secret_w == key.cover_h * key.cover_w && key.secret_h >= 1 && key.secret_w >= 1,
          ErrorKind::KeyMismatch, "key secret dimensions do not match the cover's pixel count");
  require(key.strength > 0.0 && std::isfinite(key.strength), ErrorKind::KeyMismatch, "key strength must be > 0");
  require(container.mode == key.mode, ErrorKind::KeyMismatch, "container mode differs from the key's mode");
}

inline RevealMetrics reveal_metrics(const RevealResult& r, const Matrix& cover_component, const Container& container,
                                    const RevealReferences& refs) {
  RevealMetrics m;
  if (refs.cover) {
    const Matrix ref = refs.cover->channel(0);
    m.cover_sir_db = sir(ref, cover_component);
    m.container_sir_db = sir(ref, container.image.channel(0));
  }
  if (refs.secret) {
    require(refs.secret->width == r.secret.width && refs.secret->height == r.secret.height, ErrorKind::DimMismatch,
            "reference secret dimensions differ from the key");
    std::vector<Matrix> truth_payload, truth_image, est_image;
    for (std::size_t c = 0; c < 3; ++c) {
      const Matrix ref = refs.secret->channel(c);
      truth_payload.push_back(ref.array() - kPayloadOffset);
      truth_image.push_back(ref);
      est_image.push_back(r.secret.channel(c));
      m.payload_sir_db[c] = sir(truth_payload.back(), r.payload[c]);
      m.image_sir_db[c] = sir(ref, est_image.back());
    }
    m.payload_tsir_db = tsir(truth_payload, r.payload);
    m.image_tsir_db = tsir(truth_image, est_image);
  }
  return m;
}

/// Positive rank-`rank` cover with values in [0, 0.9]: a product of two
/// uniform [0, 1) factors, rescaled so the brightest pixel is 0.9.
inline GrayImage synthetic_cover(std::size_t h, std::size_t w, std::size_t rank, std::uint64_t seed) {
  require(rank >= 1 && rank <= std::min(h, w), ErrorKind::BadRank, "cover rank out of range");
  SplitMix64 g(seed);
  Matrix u(h, rank), v(w, rank);
  for (Eigen::Index k = 0; k < u.size(); ++k) u.data()[k] = g.uniform();
  for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = g.uniform();
  const Matrix m = u * v.transpose();
  GrayImage img(w, h);
  img.set_channel(0, 0.9 * m / m.maxCoeff());
  return img;
}

/// RGB secret whose channels are mid-gray plus a rank-`rank` pattern with
/// peak deviation 0.45, so every centred channel has exact rank `rank`.
inline RgbImage synthetic_secret(std::size_t h, std::size_t w, std::size_t rank, std::uint64_t seed) {
  require(rank >= 1 && rank <= std::min(h, w), ErrorKind::BadRank, "secret rank out of range");
  GaussianStream g(seed);
  RgbImage img(w, h);
  for (std::size_t c = 0; c < 3; ++c) {
    const Matrix u = gaussian_matrix(h, rank, g), v = gaussian_matrix(w, rank, g);
    const Matrix p = u * v.transpose();
    img.set_channel(c, (0.45 * p / p.cwiseAbs().maxCoeff()).array() + kPayloadOffset);
  }
  return img;
}

inline RevealResult reveal(const Container& container, const StegoKey& key,
                           const std::optional<SolverConfig>& solver_config = std::nullopt,
                           const RevealReferences& refs = {}) {
  check_key(container, key);
  const SolverConfig config = solver_config.value_or(reveal_solver_config(container));
  const Problem problem{DenseTensor({key.cover_h, key.cover_w}, container.image.samples), stego_ops(key)};
  const SolverResult solved = decompose(problem, config);

  RevealResult out;
  out.iterations = solved.iterations;
  out.converged = solved.converged;
  out.residual = solved.final_residual();
  out.cover = GrayImage(key.cover_w, key.cover_h);
  out.cover.set_channel(0, solved.components[0].cwiseMax(0.0).cwiseMin(1.0));
  out.secret = RgbImage(key.secret_w, key.secret_h);
  for (std::size_t c = 0; c < 3; ++c) {
    out.payload.push_back(solved.components[c + 1] / key.strength);
    out.secret.set_channel(c, (out.payload.back().array() + kPayloadOffset).cwiseMax(0.0).cwiseMin(1.0).matrix());
  }
  if (refs.secret || refs.cover) out.metrics = reveal_metrics(out, solved.components[0], container, refs);
  return out;
}

/// CSV: target,payload_sir_db,image_sir_db
inline void write_reveal_metrics_csv(std::ostream& os, const RevealMetrics& m, bool with_secret) {
  os << "target,payload_sir_db,image_sir_db\n";
  os.precision(17);
  if (m.container_sir_db) os << "container," << *m.container_sir_db << ',' << *m.container_sir_db << '\n';
  if (m.cover_sir_db) os << "cover," << *m.cover_sir_db << ',' << *m.cover_sir_db << '\n';
  if (with_secret) {
    static constexpr const char* kNames[] = {"R", "G", "B"};
    for (std::size_t c = 0; c < 3; ++c) os << kNames[c] << ',' << m.payload_sir_db[c] << ',' << m.image_sir_db[c] << '\n';
    os << "secret," << m.payload_tsir_db << ',' << m.image_tsir_db << '\n';
  }
}

// Key file:
//   rtd-stego v1
//   seed <u64>
//   cover <h> <w>
//   secret <h> <w>
//   strength <decimal>
//   mode <float|q8>

inline std::string format_decimal(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_key(std::ostream& out, const StegoKey& key) {
  out << "rtd-stego v" << key.format_version << '\n'
      << "seed " << key.master_seed << '\n'
      << "cover " << key.cover_h << ' ' << key.cover_w << '\n'
      << "secret " << key.secret_h << ' ' << key.secret_w << '\n'
      << "strength " << format_decimal(key.strength) << '\n'
      << "mode " << (key.mode == ContainerMode::Float ? "float" : "q8") << '\n';
}

inline StegoKey read_key(std::istream& in) {
  StegoKey key;
  std::string line, word;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::MalformedHeader, "empty key file");
  require(line.rfind("rtd-stego v", 0) == 0, ErrorKind::MalformedHeader, "expected 'rtd-stego v1'");
  require(line == "rtd-stego v1", ErrorKind::KeyMismatch, "unsupported key version: " + line);

  const auto expect = [&](const char* name) -> std::istringstream {
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::MalformedHeader, std::string("missing ") + name);
    std::istringstream ls(line);
    require(static_cast<bool>(ls >> word) && word == name, ErrorKind::MalformedHeader,
            std::string("expected '") + name + "' line, got: " + line);
    return ls;
  };
  const auto done = [&](std::istringstream& ls, bool ok) {
    require(ok && !(ls >> word), ErrorKind::MalformedHeader, "malformed key line: " + line);
  };

  {
    auto ls = expect("seed");
    done(ls, static_cast<bool>(ls >> key.master_seed));
  }
  {
    auto ls = expect("cover");
    done(ls, static_cast<bool>(ls >> key.cover_h >> key.cover_w));
  }
  {
    auto ls = expect("secret");
    done(ls, static_cast<bool>(ls >> key.secret_h >> key.secret_w));
  }
  {
    auto ls = expect("strength");
    std::string text;
    bool ok = static_cast<bool>(ls >> text);
    if (ok) {
      const auto res = std::from_chars(text.data(), text.data() + text.size(), key.strength);
      ok = res.ec == std::errc{} && res.ptr == text.data() + text.size();
    }
    done(ls, ok);
  }
  {
    auto ls = expect("mode");
    std::string mode;
    const bool ok = static_cast<bool>(ls >> mode) && (mode == "float" || mode == "q8");
    done(ls, ok);
    key.mode = mode == "float" ? ContainerMode::Float : ContainerMode::Quantized8;
  }
  return key;
}

inline void write_key(const std::string& path, const StegoKey& key) {
  std::ofstream out(path, std::ios::trunc);
  require(out.is_open(), ErrorKind::Io, "cannot write " + path);
  write_key(out, key);
}

inline StegoKey read_key(const std::string& path) {
  std::ifstream in(path);
  require(in.is_open(), ErrorKind::Io, "cannot open " + path);
  return read_key(in);
}

/// Float containers are stored as 16-bit PGM (round(clamp(x,0,1)·65535));
/// Quantized8 containers as 8-bit PGM.
inline void write_container(const std::string& path, const Container& c) {
  write_image(c.image, path, c.mode == ContainerMode::Float ? 65535u : 255u);
}

inline Container read_container(const std::string& path, ContainerMode mode) {
  return Container{read_gray_image(path), mode};
}

}  // namespace rtd
