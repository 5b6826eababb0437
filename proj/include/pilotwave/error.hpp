#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pilotwave {

enum class ErrorCode {
  InvalidArgument,
  ZeroNorm,
  UnknownDimension,
  BoundaryMassExceeded,
  NonUnitaryStep,
  AllNodes,
  LeftGrid,
  HitNode,
  NoChannels,
  TooFewSelected,
  MismatchedTimes,
  NonFinite,
  ZeroDuration,
  ConfigError,
  CorruptHeader,
  TruncatedPayload,
  MissingArtifact,
};

std::string_view to_string(ErrorCode code);

/// True for errors raised by the numerics (as opposed to bad input).
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace pilotwave
