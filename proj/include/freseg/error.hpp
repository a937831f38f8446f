#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace freseg {

enum class ErrorKind {
  DegenerateSkeleton,
  EmptyCloud,
  IndexOutOfRange,
  NonOrthonormalRotation,
  TooFewPoints,
  NoLeaves,
  BadWindow,
  EmptyFragment,
  MissingVotes,
  UncoveredPoint,
  OutOfGrid,
  ParseError,
  CyclicParentage,
  MixedArity,
  ShapeMismatch,
  NonPolygonalFace,
  BadSpec,
  LengthMismatch,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateSkeleton: return "DegenerateSkeleton";
    case ErrorKind::EmptyCloud: return "EmptyCloud";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NonOrthonormalRotation: return "NonOrthonormalRotation";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::NoLeaves: return "NoLeaves";
    case ErrorKind::BadWindow: return "BadWindow";
    case ErrorKind::EmptyFragment: return "EmptyFragment";
    case ErrorKind::MissingVotes: return "MissingVotes";
    case ErrorKind::UncoveredPoint: return "UncoveredPoint";
    case ErrorKind::OutOfGrid: return "OutOfGrid";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::CyclicParentage: return "CyclicParentage";
    case ErrorKind::MixedArity: return "MixedArity";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonPolygonalFace: return "NonPolygonalFace";
    case ErrorKind::BadSpec: return "BadSpec";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace freseg
