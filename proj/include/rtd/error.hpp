#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rtd {

enum class ErrorKind {
  ShapeMismatch,
  NonFinite,
  BadRank,
  BadIndex,
  DegenerateRank,
  DivergenceDetected,
  AllZeroSignal,
  DimMismatch,
  StrengthOutOfRange,
  KeyMismatch,
  MalformedHeader,
  UnsupportedMaxval,
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::BadRank: return "BadRank";
    case ErrorKind::BadIndex: return "BadIndex";
    case ErrorKind::DegenerateRank: return "DegenerateRank";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::AllZeroSignal: return "AllZeroSignal";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::StrengthOutOfRange: return "StrengthOutOfRange";
    case ErrorKind::KeyMismatch: return "KeyMismatch";
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::UnsupportedMaxval: return "UnsupportedMaxval";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace rtd
