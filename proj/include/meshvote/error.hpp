#pragma once

#include <stdexcept>
#include <string>

namespace meshvote {

enum class ErrorCode {
  Io,
  Parse,
  UnsupportedFormat,
  DegenerateGeometry,
  Config,
  MissingTexture,
  DimensionMismatch,
  EmptyRender,
  BackendUnavailable,
  MissingPrecomputed,
  LabelMismatch,
  LengthMismatch,
  TopologyMismatch,
  MeshMismatch,
  UnknownLabel,
  Precondition,
};

const char* error_code_name(ErrorCode code) noexcept;

/// Base of every error raised by the library. The code decides the CLI exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for failures of a grounding backend (network, missing replay files).
  bool is_backend_error() const noexcept {
    return code_ == ErrorCode::BackendUnavailable ||
           code_ == ErrorCode::MissingPrecomputed;
  }

 private:
  ErrorCode code_;
};

template <ErrorCode Code>
class CodedError : public Error {
 public:
  explicit CodedError(const std::string& message) : Error(Code, message) {}
};

using IoError = CodedError<ErrorCode::Io>;
using ParseError = CodedError<ErrorCode::Parse>;
using UnsupportedFormat = CodedError<ErrorCode::UnsupportedFormat>;
using DegenerateGeometry = CodedError<ErrorCode::DegenerateGeometry>;
using ConfigError = CodedError<ErrorCode::Config>;
using MissingTexture = CodedError<ErrorCode::MissingTexture>;
using DimensionMismatch = CodedError<ErrorCode::DimensionMismatch>;
using EmptyRender = CodedError<ErrorCode::EmptyRender>;
using BackendUnavailable = CodedError<ErrorCode::BackendUnavailable>;
using MissingPrecomputed = CodedError<ErrorCode::MissingPrecomputed>;
using LabelMismatch = CodedError<ErrorCode::LabelMismatch>;
using LengthMismatch = CodedError<ErrorCode::LengthMismatch>;
using TopologyMismatch = CodedError<ErrorCode::TopologyMismatch>;
using MeshMismatch = CodedError<ErrorCode::MeshMismatch>;
using UnknownLabel = CodedError<ErrorCode::UnknownLabel>;
using PreconditionError = CodedError<ErrorCode::Precondition>;

}  // namespace meshvote
