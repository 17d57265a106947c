// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace phylotrace {

enum class ErrorCode {
  // tensor archives
  MalformedHeader,
  InvalidHeader,
  UnknownDtype,
  DuplicateName,
  OutOfBounds,
  OverlappingRanges,
  NonContiguous,
  EmptyTensor,
  NonFiniteWeight,
  Io,
  // metrics
  LengthMismatch,
  DegenerateVector,
  LayerMismatch,
  ShapeMismatch,
  // distance matrices
  InvalidMatrix,
  DuplicateLabel,
  // trees
  TooFewTaxa,
  ParseError,
  InvalidTree,
  LeafSetMismatch,
  // embeddings
  DimensionMismatch,
  DuplicateKey,
  MissingModel,
  NonFiniteValue,
  DegenerateData,
  // general
  InvalidArgument,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::InvalidHeader: return "InvalidHeader";
    case ErrorCode::UnknownDtype: return "UnknownDtype";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::OverlappingRanges: return "OverlappingRanges";
    case ErrorCode::NonContiguous: return "NonContiguous";
    case ErrorCode::EmptyTensor: return "EmptyTensor";
    case ErrorCode::NonFiniteWeight: return "NonFiniteWeight";
    case ErrorCode::Io: return "Io";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::LayerMismatch: return "LayerMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::TooFewTaxa: return "TooFewTaxa";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidTree: return "InvalidTree";
    case ErrorCode::LeafSetMismatch: return "LeafSetMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Single exception type for the whole library; tests and the CLI dispatch
/// on code(), messages are for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace phylotrace
