#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace netlavarx {

enum class ErrorKind {
  InvalidInput,
  ConstantColumn,
  InsufficientData,
  DependencyNotReady,
  ShapeMismatch,
  GenerationFailed,
  UnstableSystem,
  DegenerateGeometry,
  InsufficientRank,
  GridExhausted,
  InvalidFormat,
  ConfigError,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::ConstantColumn: return "ConstantColumn";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::DependencyNotReady: return "DependencyNotReady";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::GenerationFailed: return "GenerationFailed";
    case ErrorKind::UnstableSystem: return "UnstableSystem";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::InsufficientRank: return "InsufficientRank";
    case ErrorKind::GridExhausted: return "GridExhausted";
    case ErrorKind::InvalidFormat: return "InvalidFormat";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Numerical failures are distinguished from bad data/config so that front
/// ends can map them to different exit statuses.
inline bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::GenerationFailed:
    case ErrorKind::UnstableSystem:
    case ErrorKind::DegenerateGeometry:
    case ErrorKind::InsufficientRank:
    case ErrorKind::GridExhausted:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace netlavarx
