#include "scalesearch/error.h"

namespace scalesearch {

std::string_view ErrorCodeName(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kSyntax: return "syntax error";
    case ErrorCode::kConstraintViolation: return "constraint violation";
    case ErrorCode::kUnknownField: return "unknown field";
    case ErrorCode::kTypeMismatch: return "type mismatch";
    case ErrorCode::kCorruptPayload: return "corrupt payload";
    case ErrorCode::kEmptyBuffer: return "empty buffer";
    case ErrorCode::kBufferConsumed: return "buffer consumed";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kChecksumMismatch: return "checksum mismatch";
    case ErrorCode::kUnsupportedVersion: return "unsupported version";
    case ErrorCode::kNonIndexedField: return "non-indexed field";
    case ErrorCode::kOutOfOrderSegment: return "out-of-order segment";
    case ErrorCode::kUnknownTopic: return "unknown topic";
    case ErrorCode::kUnknownGroup: return "unknown group";
    case ErrorCode::kRoutingMismatch: return "routing mismatch";
    case ErrorCode::kOffsetRegression: return "offset regression";
    case ErrorCode::kAlreadyExists: return "already exists";
    case ErrorCode::kNotFound: return "not found";
    case ErrorCode::kIOError: return "I/O error";
    case ErrorCode::kOrdinalOutOfRange: return "ordinal out of range";
    case ErrorCode::kMissingColumn: return "missing column";
    case ErrorCode::kFieldMisuse: return "field misuse";
    case ErrorCode::kDomain: return "domain error";
    case ErrorCode::kUnsplittable: return "unsplittable shard";
    case ErrorCode::kAssignmentFailure: return "assignment failure";
  }
  return "unknown error";
}

}  // namespace scalesearch
