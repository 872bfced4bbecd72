#include "meshvote/error.hpp"

namespace meshvote {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Io: return "IoError";
    case ErrorCode::Parse: return "ParseError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::MissingTexture: return "MissingTexture";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyRender: return "EmptyRender";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MissingPrecomputed: return "MissingPrecomputed";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TopologyMismatch: return "TopologyMismatch";
    case ErrorCode::MeshMismatch: return "MeshMismatch";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::Precondition: return "PreconditionError";
  }
  return "Error";
}

}  // namespace meshvote
