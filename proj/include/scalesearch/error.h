#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scalesearch {

enum class ErrorCode {
  kInvalidArgument,
  kSyntax,
  kConstraintViolation,
  kUnknownField,
  kTypeMismatch,
  kCorruptPayload,
  kEmptyBuffer,
  kBufferConsumed,
  kBadMagic,
  kChecksumMismatch,
  kUnsupportedVersion,
  kNonIndexedField,
  kOutOfOrderSegment,
  kUnknownTopic,
  kUnknownGroup,
  kRoutingMismatch,
  kOffsetRegression,
  kAlreadyExists,
  kNotFound,
  kIOError,
  kOrdinalOutOfRange,
  kMissingColumn,
  kFieldMisuse,
  kDomain,
  kUnsplittable,
  kAssignmentFailure,
};

std::string_view ErrorCodeName(ErrorCode code) noexcept;

// All library failures surface as this exception; code() is the stable part,
// what() carries context such as byte offsets or field names.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace scalesearch
