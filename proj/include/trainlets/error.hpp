#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trainlets {

enum class ErrorCode {
  UnsupportedFamily,
  InvalidOrder,
  InvalidLength,
  TooManyLevels,
  InvalidSignalLength,
  DimensionMismatch,
  InconsistentGram,
  StaleGram,
  InvalidSigma,
  InvalidConfig,
  IoError,
  FormatError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedFamily:
      return "UnsupportedFamily";
    case ErrorCode::InvalidOrder:
      return "InvalidOrder";
    case ErrorCode::InvalidLength:
      return "InvalidLength";
    case ErrorCode::TooManyLevels:
      return "TooManyLevels";
    case ErrorCode::InvalidSignalLength:
      return "InvalidSignalLength";
    case ErrorCode::DimensionMismatch:
      return "DimensionMismatch";
    case ErrorCode::InconsistentGram:
      return "InconsistentGram";
    case ErrorCode::StaleGram:
      return "StaleGram";
    case ErrorCode::InvalidSigma:
      return "InvalidSigma";
    case ErrorCode::InvalidConfig:
      return "InvalidConfig";
    case ErrorCode::IoError:
      return "IoError";
    case ErrorCode::FormatError:
      return "FormatError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace detail
}  // namespace trainlets
